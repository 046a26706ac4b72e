//! Long-format panel ingestion and plot-ready result files.
//!
//! A panel has one row per `(unit, time)` with a covariate and a response
//! column; each unit becomes one covariate curve and one response curve on the
//! grid spanned by the shared time points. Results are written either as CSV
//! (`series,t,value` rows under `# key=value` metadata comments) or as JSON
//! (`{metadata, series: [{name, t, v}]}`). Finite numbers are written with 17
//! significant digits, so every file reads back to the exact same bits.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{FunqError, Result};
use crate::estimators::FunctionalSample;
use crate::function_space::{Curve, Grid};

/// Column names of a long-format panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub unit: String,
    pub time: String,
    pub covariate: String,
    pub response: String,
}

impl PanelSchema {
    pub fn new(
        unit: impl Into<String>,
        time: impl Into<String>,
        covariate: impl Into<String>,
        response: impl Into<String>,
    ) -> Result<Self> {
        let schema = Self {
            unit: unit.into(),
            time: time.into(),
            covariate: covariate.into(),
            response: response.into(),
        };
        let names = schema.columns();
        for (i, a) in names.iter().enumerate() {
            if a.is_empty() {
                return Err(FunqError::InvalidArgument("empty column name".into()));
            }
            if names[..i].contains(a) {
                return Err(FunqError::InvalidArgument(format!(
                    "column {a:?} used twice in schema"
                )));
            }
        }
        Ok(schema)
    }

    pub fn columns(&self) -> [&str; 4] {
        [&self.unit, &self.time, &self.covariate, &self.response]
    }
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self::new("unit", "time", "x", "y").expect("distinct defaults")
    }
}

/// `"unit,time,x,y"`.
impl FromStr for PanelSchema {
    type Err = FunqError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [u, t, x, y] => Self::new(*u, *t, *x, *y),
            _ => Err(FunqError::InvalidArgument(format!(
                "schema needs four comma-separated column names, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for PanelSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.columns().join(","))
    }
}

/// A sample together with the unit identifiers, in first-appearance order,
/// and any `# key=value` lines leading the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub units: Vec<String>,
    pub sample: FunctionalSample,
    pub metadata: BTreeMap<String, String>,
}

impl Panel {
    pub fn new(units: Vec<String>, sample: FunctionalSample) -> Result<Self> {
        if units.len() != sample.len() {
            return Err(FunqError::DimensionMismatch {
                expected: sample.len(),
                found: units.len(),
            });
        }
        Ok(Self {
            units,
            sample,
            metadata: BTreeMap::new(),
        })
    }

    /// Units named `u001, u002, ...`.
    pub fn numbered(sample: FunctionalSample) -> Self {
        let width = sample.len().to_string().len().max(3);
        let units = (1..=sample.len())
            .map(|i| format!("u{i:0width$}"))
            .collect();
        Self {
            units,
            sample,
            metadata: BTreeMap::new(),
        }
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u == id)
    }
}

pub fn read_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<FunctionalSample> {
    Ok(load_panel(path, schema)?.sample)
}

pub fn load_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<Panel> {
    parse_panel(fs::File::open(path)?, schema)
}

struct Row {
    time: f64,
    x: f64,
    y: f64,
    line: u64,
}

fn parse_time(raw: &str, line: u64) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(t) if t.is_finite() => Ok(t),
        _ => Err(FunqError::ParseError {
            line,
            message: format!("time {raw:?} is not a finite number"),
        }),
    }
}

fn parse_cell(raw: &str, unit: &str, time: &str, line: u64) -> Result<f64> {
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
        return Err(FunqError::MissingCell {
            unit: unit.to_string(),
            time: time.to_string(),
        });
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FunqError::ParseError {
            line,
            message: format!("value {raw:?} is not a finite number"),
        }),
    }
}

/// Leading `# key=value` lines; other comments are ignored.
fn leading_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix('#'))
        .filter_map(|rest| {
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            rest.split_once('=')
                .map(|(k, v)| (k.to_string(), v.trim_end_matches('\r').to_string()))
        })
        .collect()
}

/// Parse a long-format panel from any reader.
pub fn parse_panel<R: Read>(mut reader: R, schema: &PanelSchema) -> Result<Panel> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let metadata = leading_metadata(&text);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FunqError::ParseError {
                line: 1,
                message: format!("header has no column {name:?}"),
            })
    };
    let (iu, it, ix, iy) = (
        column(&schema.unit)?,
        column(&schema.time)?,
        column(&schema.covariate)?,
        column(&schema.response)?,
    );

    let mut units: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<Row>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let unit = &record[iu];
        let raw_time = &record[it];
        let time = parse_time(raw_time, line)?;
        let x = parse_cell(&record[ix], unit, raw_time, line)?;
        let y = parse_cell(&record[iy], unit, raw_time, line)?;
        let slot = *lookup.entry(unit.to_string()).or_insert_with(|| {
            units.push(unit.to_string());
            rows.push(Vec::new());
            units.len() - 1
        });
        if let Some(prev) = rows[slot].last() {
            if time == prev.time {
                return Err(FunqError::ParseError {
                    line,
                    message: format!("duplicate row for unit {unit} at time {raw_time}"),
                });
            }
            if time < prev.time {
                return Err(FunqError::ParseError {
                    line,
                    message: format!(
                        "time {raw_time} for unit {unit} precedes the row at line {}",
                        prev.line
                    ),
                });
            }
        }
        rows[slot].push(Row { time, x, y, line });
    }
    if units.is_empty() {
        return Err(FunqError::InvalidArgument("panel has no data rows".into()));
    }

    let mut times: Vec<f64> = rows.iter().flatten().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    // Every unit's times are strictly increasing and drawn from `times`, so
    // equal length means the unit covers the whole grid.
    if let Some(k) = rows.iter().position(|r| r.len() != times.len()) {
        return Err(FunqError::RaggedPanel(units[k].clone()));
    }
    let grid = grid_from_times(&times)?;

    let mut xs = Vec::with_capacity(units.len());
    let mut ys = Vec::with_capacity(units.len());
    for unit_rows in &rows {
        xs.push(Curve::new(grid, unit_rows.iter().map(|r| r.x).collect())?);
        ys.push(Curve::new(grid, unit_rows.iter().map(|r| r.y).collect())?);
    }
    let mut panel = Panel::new(units, FunctionalSample::new(xs, ys)?)?;
    panel.metadata = metadata;
    Ok(panel)
}

fn grid_from_times(times: &[f64]) -> Result<Grid> {
    if times.len() == 1 {
        return Ok(Grid::point(times[0]));
    }
    let grid = Grid::new(times[0], times[times.len() - 1], times.len())?;
    let tol = 1e-9 * (grid.end() - grid.start());
    for (k, t) in times.iter().enumerate() {
        if (t - grid.point_at(k)).abs() > tol {
            return Err(FunqError::InvalidArgument(format!(
                "time points are not equally spaced (time {t} at position {k})"
            )));
        }
    }
    Ok(grid)
}

pub fn write_panel(path: impl AsRef<Path>, panel: &Panel, schema: &PanelSchema) -> Result<()> {
    let mut file = fs::File::create(path)?;
    write_panel_to(&mut file, panel, schema)?;
    file.flush()?;
    Ok(())
}

pub fn write_panel_to<W: Write>(mut writer: W, panel: &Panel, schema: &PanelSchema) -> Result<()> {
    for (k, v) in &panel.metadata {
        if k.is_empty() || k.contains('=') || k.contains(['\n', '\r']) || v.contains(['\n', '\r']) {
            return Err(FunqError::InvalidArgument(format!(
                "metadata entry {k:?} cannot be written on one comment line"
            )));
        }
        writeln!(writer, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.columns())?;
    let sample = &panel.sample;
    let grid = sample.covariate_grid();
    if sample.response_grid() != grid {
        return Err(FunqError::GridMismatch);
    }
    for (i, unit) in panel.units.iter().enumerate() {
        let x = sample.covariates()[i].values();
        let y = sample.responses()[i].values();
        for k in 0..grid.count() {
            w.write_record([
                unit.clone(),
                grid.point_at(k).to_string(),
                fmt_num(x[k]),
                fmt_num(y[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// 17 significant digits; `NaN`, `inf`, `-inf` otherwise.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleKind {
    QuantileCurves,
    DepthSet,
    SpreadProfile,
    CvTrace,
}

impl BundleKind {
    pub fn name(&self) -> &'static str {
        match self {
            BundleKind::QuantileCurves => "QuantileCurves",
            BundleKind::DepthSet => "DepthSet",
            BundleKind::SpreadProfile => "SpreadProfile",
            BundleKind::CvTrace => "CVTrace",
        }
    }
}

impl fmt::Display for BundleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BundleKind {
    type Err = FunqError;

    fn from_str(s: &str) -> Result<Self> {
        [
            BundleKind::QuantileCurves,
            BundleKind::DepthSet,
            BundleKind::SpreadProfile,
            BundleKind::CvTrace,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| FunqError::InvalidArgument(format!("unknown bundle kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(FunqError::DimensionMismatch {
                expected: t.len(),
                found: v.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            t,
            v,
        })
    }

    pub fn from_curve(name: impl Into<String>, curve: &Curve) -> Self {
        Self {
            name: name.into(),
            t: curve.grid().points(),
            v: curve.values().to_vec(),
        }
    }
}

/// Tabular output of one command plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub kind: BundleKind,
    pub metadata: BTreeMap<String, String>,
    pub series: Vec<Series>,
}

impl ResultBundle {
    pub fn new(kind: BundleKind) -> Self {
        Self {
            kind,
            metadata: BTreeMap::new(),
            series: Vec::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn push(&mut self, series: Series) -> &mut Self {
        self.series.push(series);
        self
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn row_count(&self) -> usize {
        self.series.iter().map(|s| s.t.len()).sum()
    }

    fn check_metadata(&self) -> Result<()> {
        for (k, v) in &self.metadata {
            if k == "kind" {
                return Err(FunqError::InvalidArgument(
                    "metadata key \"kind\" is reserved".into(),
                ));
            }
            if k.is_empty() || k.contains('=') || k.contains(['\n', '\r']) || v.contains(['\n', '\r']) {
                return Err(FunqError::InvalidArgument(format!(
                    "metadata entry {k:?} cannot be written on one comment line"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = FunqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(FunqError::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

pub fn write_results(bundle: &ResultBundle, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    fs::write(path, render_results(bundle, format)?)?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>, format: OutputFormat) -> Result<ResultBundle> {
    parse_results(&fs::read_to_string(path)?, format)
}

pub fn render_results(bundle: &ResultBundle, format: OutputFormat) -> Result<String> {
    bundle.check_metadata()?;
    match format {
        OutputFormat::Csv => render_csv(bundle),
        OutputFormat::Json => Ok(render_json(bundle)),
    }
}

pub fn parse_results(text: &str, format: OutputFormat) -> Result<ResultBundle> {
    match format {
        OutputFormat::Csv => parse_csv(text),
        OutputFormat::Json => parse_json(text),
    }
}

const CSV_HEADER: [&str; 3] = ["series", "t", "value"];

fn render_csv(bundle: &ResultBundle) -> Result<String> {
    let mut out = format!("# kind={}\n", bundle.kind);
    for (k, v) in &bundle.metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for s in &bundle.series {
        for (t, v) in s.t.iter().zip(&s.v) {
            w.write_record([s.name.as_str(), &fmt_num(*t), &fmt_num(*v)])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| FunqError::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    Ok(out)
}

fn parse_number(raw: &str, line: u64) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| FunqError::ParseError {
        line,
        message: format!("{raw:?} is not a number"),
    })
}

fn parse_csv(text: &str) -> Result<ResultBundle> {
    let mut kind = None;
    let mut metadata = BTreeMap::new();
    let mut body_start = 0;
    let mut comment_lines = 0u64;
    for line in text.split_inclusive('\n') {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        comment_lines += 1;
        body_start += line.len();
        let rest = rest.trim_end_matches(['\n', '\r']);
        let rest = rest.strip_prefix(' ').unwrap_or(rest);
        let (k, v) = rest.split_once('=').ok_or_else(|| FunqError::ParseError {
            line: comment_lines,
            message: "metadata comment is not key=value".into(),
        })?;
        if k == "kind" {
            kind = Some(v.parse::<BundleKind>()?);
        } else {
            metadata.insert(k.to_string(), v.to_string());
        }
    }
    let kind = kind.ok_or_else(|| FunqError::ParseError {
        line: 1,
        message: "missing kind metadata".into(),
    })?;

    let mut rdr = csv::ReaderBuilder::new().from_reader(text[body_start..].as_bytes());
    let header = rdr.headers().map_err(|e| shift_line(e.into(), comment_lines))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(FunqError::ParseError {
            line: comment_lines + 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut series: Vec<Series> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| shift_line(e.into(), comment_lines))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) + comment_lines;
        let t = parse_number(&record[1], line)?;
        let v = parse_number(&record[2], line)?;
        let name = &record[0];
        let slot = *lookup.entry(name.to_string()).or_insert_with(|| {
            series.push(Series {
                name: name.to_string(),
                t: Vec::new(),
                v: Vec::new(),
            });
            series.len() - 1
        });
        series[slot].t.push(t);
        series[slot].v.push(v);
    }
    Ok(ResultBundle {
        kind,
        metadata,
        series,
    })
}

fn shift_line(err: FunqError, by: u64) -> FunqError {
    match err {
        FunqError::ParseError { line, message } => FunqError::ParseError {
            line: line + by,
            message,
        },
        other => other,
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        fmt_num(x)
    } else {
        "null".into()
    }
}

fn json_array(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| json_number(*x)).collect();
    format!("[{}]", items.join(", "))
}

/// Non-finite numbers become `null` and read back as NaN.
fn render_json(bundle: &ResultBundle) -> String {
    let mut meta = vec![format!("    \"kind\": {}", json_string(bundle.kind.name()))];
    meta.extend(
        bundle
            .metadata
            .iter()
            .map(|(k, v)| format!("    {}: {}", json_string(k), json_string(v))),
    );
    let series: Vec<String> = bundle
        .series
        .iter()
        .map(|s| {
            format!(
                "    {{\"name\": {}, \"t\": {}, \"v\": {}}}",
                json_string(&s.name),
                json_array(&s.t),
                json_array(&s.v)
            )
        })
        .collect();
    let series = if series.is_empty() {
        "[]".to_string()
    } else {
        format!("[\n{}\n  ]", series.join(",\n"))
    };
    format!(
        "{{\n  \"metadata\": {{\n{}\n  }},\n  \"series\": {}\n}}\n",
        meta.join(",\n"),
        series
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    metadata: BTreeMap<String, String>,
    series: Vec<RawSeries>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    name: String,
    t: Vec<Option<f64>>,
    v: Vec<Option<f64>>,
}

fn parse_json(text: &str) -> Result<ResultBundle> {
    let raw: RawBundle = serde_json::from_str(text)?;
    let mut metadata = raw.metadata;
    let kind = metadata
        .remove("kind")
        .ok_or_else(|| FunqError::ParseError {
            line: 1,
            message: "missing kind metadata".into(),
        })?
        .parse()?;
    let unwrap = |xs: Vec<Option<f64>>| xs.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    let series = raw
        .series
        .into_iter()
        .map(|s| Series::new(s.name, unwrap(s.t), unwrap(s.v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultBundle {
        kind,
        metadata,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schema() -> PanelSchema {
        PanelSchema::default()
    }

    #[test]
    fn minimal_fixture() {
        let text = "unit,time,x,y\nA,2000,1.0,0.1\nA,2001,2.0,0.2\nA,2002,3.0,0.3\n\
                    B,2000,4.0,0.4\nB,2001,5.0,0.5\nB,2002,6.0,0.6\n";
        let p = parse_panel(text.as_bytes(), &schema()).unwrap();
        assert_eq!(p.sample.len(), 2);
        assert_eq!(p.sample.covariate_grid().count(), 3);
        assert_eq!(p.sample.covariate_grid().start(), 2000.0);
        assert_eq!(p.units, vec!["A", "B"]);
        assert_eq!(p.sample.responses()[1].values(), &[0.4, 0.5, 0.6]);
    }

    #[test]
    fn units_keep_first_appearance_order_when_interleaved() {
        let text = "# exported\nunit,time,x,y\nZ,1,1,1\nA,1,2,2\nZ,2,3,3\nA,2,4,4\n";
        let p = parse_panel(text.as_bytes(), &schema()).unwrap();
        assert_eq!(p.units, vec!["Z", "A"]);
        assert_eq!(p.sample.covariates()[0].values(), &[1.0, 3.0]);
    }

    #[test]
    fn ragged_and_malformed_panels() {
        let ragged = "unit,time,x,y\nA,2000,1,1\nA,2001,1,1\nA,2002,1,1\nB,2000,1,1\nB,2002,1,1\n";
        assert!(matches!(
            parse_panel(ragged.as_bytes(), &schema()),
            Err(FunqError::RaggedPanel(u)) if u == "B"
        ));
        let missing = "unit,time,x,y\nA,2000,1,\nA,2001,1,1\n";
        assert!(matches!(
            parse_panel(missing.as_bytes(), &schema()),
            Err(FunqError::MissingCell { unit, time }) if unit == "A" && time == "2000"
        ));
        let bad = "unit,time,x,y\nA,2000,1,1\nA,2001,oops,1\n";
        assert!(matches!(
            parse_panel(bad.as_bytes(), &schema()),
            Err(FunqError::ParseError { line: 3, .. })
        ));
        let dup = "unit,time,x,y\nA,2000,1,1\nA,2000,1,1\n";
        assert!(matches!(
            parse_panel(dup.as_bytes(), &schema()),
            Err(FunqError::ParseError { line: 3, .. })
        ));
        let unsorted = "unit,time,x,y\nA,2001,1,1\nA,2000,1,1\n";
        assert!(parse_panel(unsorted.as_bytes(), &schema()).is_err());
        let uneven = "unit,time,x,y\nA,0,1,1\nA,1,1,1\nA,3,1,1\n";
        assert!(parse_panel(uneven.as_bytes(), &schema()).is_err());
        let no_col = "unit,year,x,y\nA,0,1,1\n";
        assert!(matches!(
            parse_panel(no_col.as_bytes(), &schema()),
            Err(FunqError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn schema_parsing() {
        let s: PanelSchema = "country, year, gdp, saving".parse().unwrap();
        assert_eq!(s.response, "saving");
        assert_eq!(s.to_string(), "country,year,gdp,saving");
        assert!("a,b,c".parse::<PanelSchema>().is_err());
        assert!("a,b,b,c".parse::<PanelSchema>().is_err());
    }

    #[test]
    fn single_time_point_gives_scalar_grid() {
        let text = "unit,time,x,y\nA,5,1,2\nB,5,3,4\n";
        let p = parse_panel(text.as_bytes(), &schema()).unwrap();
        assert!(p.sample.response_grid().is_scalar());
    }

    fn penn_like(units: usize, years: usize, seed: u64) -> Panel {
        let grid = Grid::new(1960.0, (1960 + years - 1) as f64, years).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..units {
            let level: f64 = rng.random_range(500.0..20000.0);
            let growth: f64 = rng.random_range(-0.01..0.05);
            let x = Curve::from_fn(grid, |t| level * (growth * (t - 1960.0)).exp());
            let y: Vec<f64> = (0..years).map(|_| rng.random_range(0.0..0.4)).collect();
            xs.push(x);
            ys.push(Curve::new(grid, y).unwrap());
        }
        let sample = FunctionalSample::new(xs, ys).unwrap();
        let units = (0..units).map(|i| format!("C{i:03}")).collect();
        Panel::new(units, sample).unwrap()
    }

    #[test]
    fn penn_shaped_panel_round_trips_bit_identically() {
        let panel = penn_like(125, 26, 3);
        let s = PanelSchema::new("country", "year", "gdp", "saving").unwrap();
        let mut first = Vec::new();
        write_panel_to(&mut first, &panel, &s).unwrap();
        let back = parse_panel(first.as_slice(), &s).unwrap();
        assert_eq!(back, panel);
        let mut second = Vec::new();
        write_panel_to(&mut second, &back, &s).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn panel_metadata_round_trips() {
        let mut panel = penn_like(2, 3, 4);
        panel.metadata.insert("seed".into(), "7".into());
        panel.metadata.insert("model".into(), "hetero".into());
        let mut buf = Vec::new();
        write_panel_to(&mut buf, &panel, &schema()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# model=hetero\n# seed=7\nunit,time,x,y\n"));
        assert_eq!(parse_panel(buf.as_slice(), &schema()).unwrap(), panel);
    }

    #[test]
    fn empty_payload_is_header_only() {
        let b = ResultBundle::new(BundleKind::DepthSet);
        let text = render_results(&b, OutputFormat::Csv).unwrap();
        assert_eq!(text, "# kind=DepthSet\nseries,t,value\n");
        assert_eq!(parse_results(&text, OutputFormat::Csv).unwrap(), b);
        let json = render_results(&b, OutputFormat::Json).unwrap();
        assert_eq!(parse_results(&json, OutputFormat::Json).unwrap(), b);
    }

    fn quantile_bundle() -> ResultBundle {
        let panel = penn_like(3, 26, 9);
        let mut b = ResultBundle::new(BundleKind::QuantileCurves);
        b.set("h", fmt_num(0.68)).set("tau", "0.5u1").set("note", "a = b, c");
        for (name, c) in ["Q(tau)", "Q(0)", "Q(-tau)"].iter().zip(panel.sample.covariates()) {
            b.push(Series::from_curve(*name, c));
        }
        b
    }

    #[test]
    fn three_curves_give_78_rows() {
        let b = quantile_bundle();
        let text = render_results(&b, OutputFormat::Csv).unwrap();
        let data_rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(data_rows, 78);
        assert_eq!(b.row_count(), 78);
    }

    #[test]
    fn write_read_write_is_a_fixed_point() {
        let mut b = quantile_bundle();
        b.push(Series::new("with,comma \"quoted\"", vec![1.0, 2.0], vec![f64::NAN, -0.0]).unwrap());
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let first = render_results(&b, format).unwrap();
            let back = parse_results(&first, format).unwrap();
            assert_eq!(back.metadata, b.metadata);
            assert_eq!(back.series[0], b.series[0]);
            assert!(back.series[3].v[0].is_nan());
            let second = render_results(&back, format).unwrap();
            assert_eq!(first, second, "{format}");
        }
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let b = quantile_bundle();
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let path = dir.path().join(format!("q.{format}"));
            write_results(&b, &path, format).unwrap();
            assert_eq!(read_results(&path, format).unwrap(), b);
        }
        let panel = penn_like(4, 5, 1);
        let path = dir.path().join("panel.csv");
        write_panel(&path, &panel, &schema()).unwrap();
        assert_eq!(load_panel(&path, &schema()).unwrap(), panel);
    }

    #[test]
    fn numbers_carry_17_significant_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        for x in [std::f64::consts::PI, 1e-300, -123456.789, 5e-324] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn reserved_or_multiline_metadata_is_rejected() {
        let mut b = ResultBundle::new(BundleKind::CvTrace);
        b.set("kind", "x");
        assert!(render_results(&b, OutputFormat::Csv).is_err());
        let mut b = ResultBundle::new(BundleKind::CvTrace);
        b.set("k", "a\nb");
        assert!(render_results(&b, OutputFormat::Json).is_err());
    }
}
