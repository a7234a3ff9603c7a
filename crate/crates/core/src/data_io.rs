//! Delimited-file ingestion for loss tables and return series, plus the
//! standard diagnostic plot series (Pareto plot, empirical CDF, mean-excess
//! plot) and the series writers the CLI emits.
//!
//! Input is delimited text (comma by default) with an optional header and
//! column selection by name or 1-based index; the decimal point is fixed
//! as ".". Output is JSON for machines and delimited text for plotting tools.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reinsurance::empirical_mean_excess;
use crate::sample::OrderedSample;
use crate::series::PlotSeries;
use crate::dynamic_risk::ReturnSeries;

/// A column picked by 1-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl ColumnSelector {
    /// Parse "2" as an index, anything else as a name.
    pub fn parse(s: &str) -> ColumnSelector {
        match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        }
    }

    fn resolve(&self, headers: Option<&csv::StringRecord>, width: usize) -> Result<usize> {
        match self {
            ColumnSelector::Index(i) => {
                if *i == 0 || *i > width {
                    return Err(Error::Config(format!(
                        "column index {i} out of range (file has {width} columns, indices are 1-based)"
                    )));
                }
                Ok(i - 1)
            }
            ColumnSelector::Name(name) => {
                let headers = headers.ok_or_else(|| {
                    Error::Config(format!(
                        "column '{name}' selected by name but the file has no header"
                    ))
                })?;
                headers
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| {
                        Error::Config(format!("column '{name}' not found in header"))
                    })
            }
        }
    }
}

/// Parsed losses with optional period labels (e.g. years) for frequency
/// computations.
#[derive(Debug, Clone, Serialize)]
pub struct LossTable {
    pub losses: Vec<f64>,
    pub periods: Option<Vec<String>>,
    pub source: String,
}

impl LossTable {
    pub fn to_sample(&self) -> Result<OrderedSample> {
        OrderedSample::new(self.losses.clone())
    }

    /// Number of distinct period labels, when present.
    pub fn n_periods(&self) -> Option<usize> {
        self.periods
            .as_ref()
            .map(|p| p.iter().collect::<BTreeSet<_>>().len())
    }
}

fn open_reader(path: &Path, delimiter: u8, has_header: bool) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_field(field: &str, line: usize, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        row: line,
        message: format!("{what} '{field}' is not a number"),
    })
}

/// Load a positive loss column; rows with non-positive or non-finite values
/// are rejected with their file line number.
pub fn load_losses(
    path: &Path,
    column: &ColumnSelector,
    delimiter: u8,
    has_header: bool,
    period_column: Option<&ColumnSelector>,
) -> Result<LossTable> {
    let mut reader = open_reader(path, delimiter, has_header)?;
    let headers = if has_header {
        Some(reader.headers().map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?.clone())
    } else {
        None
    };

    let mut losses = Vec::new();
    let mut periods: Option<Vec<String>> = period_column.map(|_| Vec::new());
    let mut col: Option<usize> = None;
    let mut pcol: Option<usize> = None;

    for (i, record) in reader.records().enumerate() {
        let line = i + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        if col.is_none() {
            col = Some(column.resolve(headers.as_ref(), record.len())?);
            if let Some(pc) = period_column {
                pcol = Some(pc.resolve(headers.as_ref(), record.len())?);
            }
        }
        let field = record.get(col.unwrap()).ok_or_else(|| Error::Parse {
            row: line,
            message: "row has too few columns".into(),
        })?;
        let value = parse_field(field, line, "loss")?;
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::Parse {
                row: line,
                message: format!("loss must be a positive finite number, got {value}"),
            });
        }
        losses.push(value);
        if let (Some(pv), Some(pc)) = (periods.as_mut(), pcol) {
            let f = record.get(pc).ok_or_else(|| Error::Parse {
                row: line,
                message: "row has too few columns for the period label".into(),
            })?;
            pv.push(f.to_string());
        }
    }
    if losses.is_empty() {
        return Err(Error::Empty(format!(
            "no usable loss rows in {}",
            path.display()
        )));
    }
    Ok(LossTable {
        losses,
        periods,
        source: path.display().to_string(),
    })
}

/// Whether the value column holds prices (log-returns are computed) or
/// ready-made returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnsMode {
    Prices,
    Returns,
}

fn parse_timestamp(field: &str, line: usize) -> Result<f64> {
    if let Ok(v) = field.parse::<f64>() {
        return Ok(v);
    }
    for fmt in ["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%d.%m.%Y"] {
        if let Ok(d) = chrono::NaiveDate::parse_from_str(field, fmt) {
            let epoch = chrono::NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch");
            return Ok((d - epoch).num_days() as f64);
        }
    }
    Err(Error::Parse {
        row: line,
        message: format!("timestamp '{field}' is neither a number nor a recognized date"),
    })
}

/// Load a return series. In price mode the series holds
/// `log(P_t / P_(t-1))`, one shorter than the price column, keyed on the
/// later timestamp.
pub fn load_returns(
    path: &Path,
    mode: ReturnsMode,
    value_column: &ColumnSelector,
    timestamp_column: Option<&ColumnSelector>,
    delimiter: u8,
    has_header: bool,
) -> Result<ReturnSeries> {
    let mut reader = open_reader(path, delimiter, has_header)?;
    let headers = if has_header {
        Some(reader.headers().map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?.clone())
    } else {
        None
    };

    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut col: Option<usize> = None;
    let mut tcol: Option<usize> = None;

    for (i, record) in reader.records().enumerate() {
        let line = i + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        if col.is_none() {
            col = Some(value_column.resolve(headers.as_ref(), record.len())?);
            if let Some(tc) = timestamp_column {
                tcol = Some(tc.resolve(headers.as_ref(), record.len())?);
            }
        }
        let field = record.get(col.unwrap()).ok_or_else(|| Error::Parse {
            row: line,
            message: "row has too few columns".into(),
        })?;
        let v = parse_field(field, line, "value")?;
        if mode == ReturnsMode::Prices && !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parse {
                row: line,
                message: format!("price must be positive and finite, got {v}"),
            });
        }
        values.push(v);
        if let Some(tc) = tcol {
            let f = record.get(tc).ok_or_else(|| Error::Parse {
                row: line,
                message: "row has too few columns for the timestamp".into(),
            })?;
            stamps.push(parse_timestamp(f, line)?);
        }
    }
    if values.is_empty() {
        return Err(Error::Empty(format!(
            "no usable rows in {}",
            path.display()
        )));
    }

    match mode {
        ReturnsMode::Prices => {
            if values.len() < 2 {
                return Err(Error::InsufficientData(
                    "price mode needs at least 2 prices".into(),
                ));
            }
            let returns: Vec<f64> = values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            let ts = if stamps.is_empty() {
                (1..values.len()).map(|i| i as f64).collect()
            } else {
                stamps[1..].to_vec()
            };
            ReturnSeries::new(ts, returns)
        }
        ReturnsMode::Returns => {
            let ts = if stamps.is_empty() {
                (0..values.len()).map(|i| i as f64).collect()
            } else {
                stamps
            };
            ReturnSeries::new(ts, values)
        }
    }
}

/// Pareto plot points for the exceedances of `u`: the i-th smallest
/// exceedance against its empirical conditional survival probability
/// `(n - i)/n_u` (global rank i). Both axes are meant to be drawn on log
/// scales; the terminal zero-survival point is dropped so that the log-log
/// plot is well defined.
pub fn pareto_plot(sample: &OrderedSample, u: f64) -> Result<PlotSeries> {
    let exceed = sample.exceedances(u);
    let n_u = exceed.len();
    if n_u < 2 {
        return Err(Error::InsufficientData(format!(
            "Pareto plot needs at least 2 exceedances above u = {u}, found {n_u}"
        )));
    }
    let mut xs = Vec::with_capacity(n_u - 1);
    let mut ys = Vec::with_capacity(n_u - 1);
    for (k, &x) in exceed.iter().enumerate().take(n_u - 1) {
        xs.push(x);
        ys.push((n_u - 1 - k) as f64 / n_u as f64);
    }
    let mut s = PlotSeries::new(xs, ys);
    s.set_meta("series", "pareto_plot");
    s.set_meta("threshold", u);
    s.set_meta("axes", "log-log");
    s.set_meta("dropped_zero_survival_point", true);
    let spread = exceed[n_u - 1] - exceed[0];
    if spread <= 1e-12 * exceed[n_u - 1].abs() {
        s.set_meta("degenerate_vertical_stack", true);
    }
    Ok(s)
}

/// Right-continuous empirical CDF.
pub fn empirical_cdf(sample: &OrderedSample, x: f64) -> f64 {
    let idx = sample.values().partition_point(|&v| v <= x);
    idx as f64 / sample.n() as f64
}

/// Empirical mean excess across a grid of deductibles with confidence bands.
/// Grid points with fewer than 2 exceedances are left out and noted in the
/// metadata.
pub fn mean_excess_plot(sample: &OrderedSample, d_grid: &[f64], level: f64) -> Result<PlotSeries> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut failures = Vec::new();
    for &d in d_grid {
        match empirical_mean_excess(sample, d, level) {
            Ok(e) => {
                xs.push(d);
                ys.push(e.value);
                lo.push(e.ci.lo);
                hi.push(e.ci.hi);
            }
            Err(e) => failures.push(format!("d={d}: {e}")),
        }
    }
    let mut s = PlotSeries::with_bands(xs, ys, lo, hi);
    s.set_meta("series", "mean_excess_plot");
    if !failures.is_empty() {
        s.set_meta("failed_points", failures.join("; "));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Series writers
// ---------------------------------------------------------------------------

/// Serialize a series as pretty JSON.
pub fn write_series_json<W: Write>(series: &PlotSeries, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, series)
        .map_err(|e| Error::InvalidInput(format!("JSON serialization failed: {e}")))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Read a series back from JSON.
pub fn read_series_json<R: Read>(r: R) -> Result<PlotSeries> {
    serde_json::from_reader(r).map_err(|e| Error::Parse {
        row: 0,
        message: format!("JSON parse failed: {e}"),
    })
}

/// Write a series as delimited text: `# key=value` metadata comments, a
/// header row, then one row per point.
pub fn write_series_delimited<W: Write>(
    series: &PlotSeries,
    mut w: W,
    delimiter: char,
) -> Result<()> {
    for (k, v) in &series.metadata {
        writeln!(w, "# {k}={v}")?;
    }
    let has_bands = series.lo.is_some() && series.hi.is_some();
    if has_bands {
        writeln!(w, "x{delimiter}y{delimiter}lo{delimiter}hi")?;
    } else {
        writeln!(w, "x{delimiter}y")?;
    }
    for i in 0..series.len() {
        if has_bands {
            writeln!(
                w,
                "{}{delimiter}{}{delimiter}{}{delimiter}{}",
                series.x[i],
                series.y[i],
                series.lo.as_ref().unwrap()[i],
                series.hi.as_ref().unwrap()[i]
            )?;
        } else {
            writeln!(w, "{}{delimiter}{}", series.x[i], series.y[i])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::TailModel;
    use std::io::Write as _;

    fn temp_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_losses_by_index_and_name() {
        let f = temp_file("year,loss\n1980,2.5\n1981,1.2\n1980,4.0\n");
        let by_name = load_losses(
            f.path(),
            &ColumnSelector::Name("loss".into()),
            b',',
            true,
            Some(&ColumnSelector::Name("year".into())),
        )
        .unwrap();
        assert_eq!(by_name.losses, vec![2.5, 1.2, 4.0]);
        assert_eq!(by_name.n_periods(), Some(2));

        let by_index =
            load_losses(f.path(), &ColumnSelector::Index(2), b',', true, None).unwrap();
        assert_eq!(by_index.losses, vec![2.5, 1.2, 4.0]);
        assert_eq!(by_index.n_periods(), None);
    }

    #[test]
    fn load_losses_rejects_bad_rows_with_line_numbers() {
        let f = temp_file("loss\n2.5\n-1.0\n");
        match load_losses(f.path(), &ColumnSelector::Index(1), b',', true, None) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = temp_file("loss\n2.5\nabc\n");
        assert!(matches!(
            load_losses(f.path(), &ColumnSelector::Index(1), b',', true, None),
            Err(Error::Parse { row: 3, .. })
        ));
        // missing file is an io error
        assert!(matches!(
            load_losses(
                Path::new("/nonexistent/x.csv"),
                &ColumnSelector::Index(1),
                b',',
                false,
                None
            ),
            Err(Error::Io(_))
        ));
        // header-only file is empty
        let f = temp_file("loss\n");
        assert!(matches!(
            load_losses(f.path(), &ColumnSelector::Index(1), b',', true, None),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn load_losses_semicolon_delimiter() {
        let fc = temp_file("a,b\n1,2.5\n2,3.5\n");
        let fs = temp_file("a;b\n1;2.5\n2;3.5\n");
        let c = load_losses(fc.path(), &ColumnSelector::Index(2), b',', true, None).unwrap();
        let s = load_losses(fs.path(), &ColumnSelector::Index(2), b';', true, None).unwrap();
        assert_eq!(c.losses, s.losses);
    }

    #[test]
    fn load_returns_price_mode() {
        let f = temp_file("date,price\n2020-01-01,100\n2020-01-02,105\n");
        let rs = load_returns(
            f.path(),
            ReturnsMode::Prices,
            &ColumnSelector::Name("price".into()),
            Some(&ColumnSelector::Name("date".into())),
            b',',
            true,
        )
        .unwrap();
        assert_eq!(rs.len(), 1);
        assert!((rs.returns()[0] - 0.048_790_164_169_432_05).abs() < 1e-15);

        // non-positive price
        let f = temp_file("price\n100\n-5\n");
        assert!(matches!(
            load_returns(
                f.path(),
                ReturnsMode::Prices,
                &ColumnSelector::Index(1),
                None,
                b',',
                true
            ),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn load_returns_passthrough_and_unsorted_timestamps() {
        let f = temp_file("t,r\n2,0.01\n1,0.02\n");
        assert!(load_returns(
            f.path(),
            ReturnsMode::Returns,
            &ColumnSelector::Name("r".into()),
            Some(&ColumnSelector::Name("t".into())),
            b',',
            true
        )
        .is_err());

        let f = temp_file("r\n0.01\n-0.02\n");
        let rs = load_returns(
            f.path(),
            ReturnsMode::Returns,
            &ColumnSelector::Index(1),
            None,
            b',',
            true,
        )
        .unwrap();
        assert_eq!(rs.returns(), &[0.01, -0.02]);
    }

    #[test]
    fn pareto_plot_slope_recovers_alpha_on_constructed_grid() {
        // grid chosen so that the plotted survival equals the model survival
        // exactly: x_j with S(x_j) = (m - j)/m, j = 1..m-1, plus a max point
        let alpha = 2.0;
        let m = 1000usize;
        let model = TailModel::pareto(1.0, alpha).unwrap();
        let mut data: Vec<f64> = (1..m)
            .map(|j| model.inverse_survival((m - j) as f64 / m as f64).unwrap())
            .collect();
        data.push(data.last().unwrap() * 2.0);
        let s = OrderedSample::new(data).unwrap();
        let plot = pareto_plot(&s, 0.999_999).unwrap();
        assert_eq!(plot.len(), m - 1);
        // least-squares slope of log y on log x
        let lx: Vec<f64> = plot.x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = plot.y.iter().map(|v| v.ln()).collect();
        let mx = lx.iter().sum::<f64>() / lx.len() as f64;
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        assert!(
            (slope + alpha).abs() < 1e-6,
            "slope {slope} should be -{alpha}"
        );
        // y values are exactly the conditional survival probabilities
        assert!(plot.y.iter().all(|&y| y > 0.0 && y <= 1.0));
    }

    #[test]
    fn pareto_plot_edge_cases() {
        let s = OrderedSample::new(vec![1.0, 2.0, 3.0]).unwrap();
        let p = pareto_plot(&s, 1.5).unwrap();
        assert_eq!(p.len(), 1); // two exceedances, terminal point dropped
        assert!(pareto_plot(&s, 2.5).is_err());

        let s = OrderedSample::new(vec![1.0, 5.0, 5.0, 5.0]).unwrap();
        let p = pareto_plot(&s, 2.0).unwrap();
        assert_eq!(p.metadata.get("degenerate_vertical_stack").map(String::as_str), Some("true"));
    }

    #[test]
    fn empirical_cdf_step_behavior() {
        let s = OrderedSample::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(empirical_cdf(&s, 0.5), 0.0);
        assert_eq!(empirical_cdf(&s, 2.0), 2.0 / 3.0);
        assert_eq!(empirical_cdf(&s, 2.5), 2.0 / 3.0);
        assert_eq!(empirical_cdf(&s, 3.0), 1.0);
        assert_eq!(empirical_cdf(&s, 10.0), 1.0);
    }

    #[test]
    fn mean_excess_plot_vectorizes_and_records_failures() {
        let m = TailModel::gpd(0.0, 1.0, 3.0).unwrap();
        let s = OrderedSample::new(m.sample(3, 20_000).unwrap()).unwrap();
        let grid = [0.1, 0.5, 1.0, s.max() * 2.0];
        let plot = mean_excess_plot(&s, &grid, 0.95).unwrap();
        assert_eq!(plot.len(), 3);
        assert!(plot.metadata.contains_key("failed_points"));

        let single = mean_excess_plot(&s, &[0.5], 0.95).unwrap();
        assert_eq!(single.len(), 1);

        // affine trend for GPD data: least-squares slope near 1/(alpha-1) = 0.5
        let grid: Vec<f64> = (0..10).map(|i| 0.2 + i as f64 * 0.2).collect();
        let plot = mean_excess_plot(&s, &grid, 0.95).unwrap();
        let mx = plot.x.iter().sum::<f64>() / plot.len() as f64;
        let my = plot.y.iter().sum::<f64>() / plot.len() as f64;
        let sxy: f64 = plot.x.iter().zip(&plot.y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = plot.x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        assert!((slope - 0.5).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn series_json_round_trips_bit_exactly() {
        let m = TailModel::pareto(1.0, 1.5).unwrap();
        let xs = m.sample(9, 50).unwrap();
        let mut series = PlotSeries::with_bands(
            xs.clone(),
            xs.iter().map(|v| v * 0.1).collect(),
            xs.iter().map(|v| v * 0.09).collect(),
            xs.iter().map(|v| v * 0.11).collect(),
        );
        series.set_meta("series", "test");
        series.set_meta("p", 0.005);

        let mut buf = Vec::new();
        write_series_json(&series, &mut buf).unwrap();
        let back = read_series_json(buf.as_slice()).unwrap();
        assert_eq!(series, back);
        let mut buf2 = Vec::new();
        write_series_json(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2, "serialized bytes must round-trip exactly");
    }

    #[test]
    fn series_delimited_output_shape() {
        let mut series = PlotSeries::new(vec![1.0, 2.0], vec![0.5, 0.25]);
        series.set_meta("series", "demo");
        let mut buf = Vec::new();
        write_series_delimited(&series, &mut buf, ',').unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# series=demo");
        assert_eq!(lines[1], "x,y");
        assert_eq!(lines[2], "1,0.5");
        assert_eq!(lines[3], "2,0.25");
    }
}
