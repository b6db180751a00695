//! CSV loaders: plain numeric rows without headers. Lines starting with `#`
//! are comments; ragged rows are rejected. Entries may be `inf`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{HPolytope, Point, Polygon2D};
use crate::model::{CorrelationModel, ThresholdVector};

fn parse_rows<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Csv(format!("row {}: not a number: {field:?}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    Ok(rows)
}

/// Numeric rows of a CSV file.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_rows(std::fs::File::open(path)?)
}

/// Numeric rows of CSV text.
pub fn parse_str(text: &str) -> Result<Vec<Vec<f64>>> {
    parse_rows(text.as_bytes())
}

/// A covariance matrix, one row per line.
pub fn read_covariance(path: &Path) -> Result<CorrelationModel> {
    CorrelationModel::from_covariance(&read_rows(path)?)
}

/// Thresholds, either on one line or one per line.
pub fn read_thresholds(path: &Path) -> Result<ThresholdVector> {
    ThresholdVector::new(read_rows(path)?.into_iter().flatten().collect())
}

/// Polygon vertices `x, y`, one per line.
pub fn read_polygon(path: &Path) -> Result<Polygon2D> {
    let points = read_rows(path)?
        .into_iter()
        .map(|r| match r.as_slice() {
            [x, y] => Ok::<Point, Error>([*x, *y]),
            _ => Err(Error::Csv(format!("polygon rows need 2 columns, got {}", r.len()))),
        })
        .collect::<Result<Vec<Point>>>()?;
    Polygon2D::new(points)
}

/// Halfspaces `<normal, x> <= offset` as `normal..., offset`, one per line.
pub fn read_hpolytope(path: &Path) -> Result<HPolytope> {
    let rows = read_rows(path)?;
    if rows[0].len() < 2 {
        return Err(Error::Csv("halfspace rows need a normal and an offset".into()));
    }
    HPolytope::new(
        rows.into_iter()
            .map(|mut r| {
                let offset = r.pop().unwrap_or_default();
                (r, offset)
            })
            .collect(),
    )
}
