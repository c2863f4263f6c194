use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::record::{AnemiaLabel, CbcRecord, Gender, LabeledRecord};
use crate::error::{Error, Result};

pub const FEATURE_COLUMNS: [&str; 9] =
    ["age", "gender", "rbc", "hgb", "hct", "mcv", "mch", "mchc", "wbc"];

/// Formats with six significant digits, trailing zeros trimmed.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

fn record_fields(r: &CbcRecord) -> [String; 9] {
    [
        r.age.to_string(),
        r.gender.as_str().to_string(),
        format_sig6(r.rbc),
        format_sig6(r.hgb),
        format_sig6(r.hct),
        format_sig6(r.mcv),
        format_sig6(r.mch),
        format_sig6(r.mchc),
        format_sig6(r.wbc),
    ]
}

pub fn write_labeled<W: Write>(records: &[LabeledRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = FEATURE_COLUMNS.to_vec();
    header.push("label");
    w.write_record(&header)?;
    for r in records {
        let mut row = record_fields(&r.record).to_vec();
        row.push(r.label.token().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_unlabeled<W: Write>(records: &[CbcRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_COLUMNS)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(records: &[LabeledRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_labeled(records, std::io::BufWriter::new(file))
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(header: &csv::StringRecord) -> Self {
        let index = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
            .collect();
        Columns { index }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

fn cell<'a>(row: &'a csv::StringRecord, idx: usize, row_no: usize, column: &str) -> Result<&'a str> {
    row.get(idx).map(str::trim).ok_or_else(|| Error::BadCell {
        row: row_no,
        column: column.to_string(),
        message: "missing cell".into(),
    })
}

fn parse_record(row: &csv::StringRecord, cols: &[usize; 9], row_no: usize) -> Result<CbcRecord> {
    let bad = |column: &str, message: String| Error::BadCell {
        row: row_no,
        column: column.to_string(),
        message,
    };
    let num = |k: usize| -> Result<f64> {
        let name = FEATURE_COLUMNS[k];
        let text = cell(row, cols[k], row_no, name)?;
        text.parse::<f64>()
            .map_err(|_| bad(name, format!("cannot parse `{text}` as a number")))
    };
    let age_text = cell(row, cols[0], row_no, "age")?;
    let age = age_text
        .parse::<u32>()
        .map_err(|_| bad("age", format!("cannot parse `{age_text}` as an age in years")))?;
    let gender = cell(row, cols[1], row_no, "gender")?
        .parse::<Gender>()
        .map_err(|m| bad("gender", m))?;
    Ok(CbcRecord {
        age,
        gender,
        rbc: num(2)?,
        hgb: num(3)?,
        hct: num(4)?,
        mcv: num(5)?,
        mch: num(6)?,
        mchc: num(7)?,
        wbc: num(8)?,
    })
}

fn feature_indices(cols: &Columns) -> Result<[usize; 9]> {
    let mut idx = [0; 9];
    for (slot, name) in idx.iter_mut().zip(FEATURE_COLUMNS) {
        *slot = cols.require(name)?;
    }
    Ok(idx)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

/// Row numbers in errors are 1-based data rows (the header is not counted).
pub fn read_labeled<R: Read>(input: R) -> Result<Vec<LabeledRecord>> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let features = feature_indices(&cols)?;
    let label_col = cols.require("label")?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let record = parse_record(&row, &features, row_no)?;
        let token = cell(&row, label_col, row_no, "label")?;
        let label = token.parse::<AnemiaLabel>().map_err(|_| Error::UnknownLabel {
            row: row_no,
            token: token.to_string(),
        })?;
        out.push(LabeledRecord { record, label });
    }
    Ok(out)
}

/// Reads feature columns only; a `label` column, if present, is ignored.
pub fn read_unlabeled<R: Read>(input: R) -> Result<Vec<CbcRecord>> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let features = feature_indices(&cols)?;
    rdr.records()
        .enumerate()
        .map(|(i, row)| parse_record(&row?, &features, i + 1))
        .collect()
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledRecord>> {
    read_labeled(std::fs::File::open(path)?)
}

pub fn load_unlabeled_csv(path: impl AsRef<Path>) -> Result<Vec<CbcRecord>> {
    read_unlabeled(std::fs::File::open(path)?)
}
