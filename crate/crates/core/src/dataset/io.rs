use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::{AttributeSchema, Microdata, Role};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// Columns removed from the file before matching the header against the
    /// schema (e.g. a categorical column the toolkit cannot use).
    pub drop_columns: Vec<String>,
    /// Factorize non-numeric confidential columns into integer codes, in
    /// order of first appearance.
    pub encode_categorical: bool,
}

/// Per-column code tables produced by categorical encoding: code `i` stands
/// for `labels[i]`.
pub type CodeMaps = BTreeMap<String, Vec<String>>;

pub fn load_table(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Microdata> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, schema, &ReadOptions::default()).map(|(md, _)| md)
}

/// [`load_table`] with column dropping and categorical encoding.
pub fn load_table_with(
    path: impl AsRef<Path>,
    schema: &AttributeSchema,
    opts: &ReadOptions,
) -> Result<(Microdata, CodeMaps)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, schema, opts)
}

pub fn read_table<R: Read>(
    reader: R,
    schema: &AttributeSchema,
    opts: &ReadOptions,
) -> Result<(Microdata, CodeMaps)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&j| !opts.drop_columns.contains(&header[j]))
        .collect();
    let kept_names: Vec<String> = keep.iter().map(|&j| header[j].clone()).collect();
    let expected: Vec<String> = schema.names().into_iter().map(str::to_owned).collect();
    if kept_names != expected {
        return Err(Error::HeaderMismatch {
            expected,
            found: kept_names,
        });
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        cells.push(keep.iter().map(|&j| rec[j].to_owned()).collect());
    }
    if cells.is_empty() {
        return Err(Error::Empty);
    }

    let m = expected.len();
    let mut codes = CodeMaps::new();
    let mut data = Matrix::zeros(cells.len(), m);
    for (j, attr) in schema.attributes().iter().enumerate() {
        let numeric = cells.iter().all(|r| r[j].parse::<f64>().is_ok());
        if !numeric && opts.encode_categorical && attr.role == Role::Confidential {
            let mut labels: Vec<String> = Vec::new();
            for (i, r) in cells.iter().enumerate() {
                if r[j].is_empty() {
                    return Err(Error::MissingCell {
                        row: i,
                        column: attr.name.clone(),
                    });
                }
                let code = match labels.iter().position(|l| *l == r[j]) {
                    Some(c) => c,
                    None => {
                        labels.push(r[j].clone());
                        labels.len() - 1
                    }
                };
                data.set(i, j, code as f64);
            }
            codes.insert(attr.name.clone(), labels);
            continue;
        }
        for (i, r) in cells.iter().enumerate() {
            let raw = &r[j];
            if raw.is_empty() {
                return Err(Error::MissingCell {
                    row: i,
                    column: attr.name.clone(),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => data.set(i, j, v),
                _ => {
                    return Err(Error::BadCell {
                        row: i,
                        column: attr.name.clone(),
                        value: raw.clone(),
                    })
                }
            }
        }
    }
    Ok((Microdata::new(schema.clone(), data)?, codes))
}

/// Formats `v` with 17 significant digits, which round-trips every finite
/// `f64`. Trailing zeros are trimmed; integral values print without a point.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_owned()
    } else {
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_table<W: Write>(md: &Microdata, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(md.schema().names())?;
    for row in md.data().rows_iter() {
        w.write_record(row.iter().map(|&v| format_value(v)))?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_table(md: &Microdata, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(md, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Role;
    use proptest::prelude::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::from_pairs(&[
            ("ZIP", Role::QuasiIdentifier),
            ("Age", Role::QuasiIdentifier),
            ("Salary", Role::Confidential),
        ])
        .unwrap()
    }

    fn read(text: &str) -> Result<Microdata> {
        read_table(text.as_bytes(), &schema(), &ReadOptions::default()).map(|(m, _)| m)
    }

    #[test]
    fn reads_small_table() {
        let md = read("ZIP,Age,Salary\n1011,22,500\n1007,22,550\n1012,23,600\n").unwrap();
        assert_eq!((md.n(), md.m()), (3, 3));
        assert_eq!(md.row(1), &[1007.0, 22.0, 550.0]);
        assert_eq!(md.row_ids(), &[0, 1, 2]);
    }

    #[test]
    fn header_mismatch() {
        let err = read("ZIP,Age\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::HeaderMismatch { .. }));
    }

    #[test]
    fn missing_and_bad_cells() {
        assert!(matches!(
            read("ZIP,Age,Salary\n1,,3\n"),
            Err(Error::MissingCell { row: 0, .. })
        ));
        assert!(matches!(
            read("ZIP,Age,Salary\n1,2,abc\n"),
            Err(Error::BadCell { .. })
        ));
        assert!(matches!(
            read("ZIP,Age,Salary\n1,2,inf\n"),
            Err(Error::BadCell { .. })
        ));
        assert!(matches!(read("ZIP,Age,Salary\n"), Err(Error::Empty)));
    }

    #[test]
    fn missing_file() {
        let err = load_table("/nonexistent/table.csv", &schema()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn drop_and_encode() {
        let text = "STATE,ZIP,Age,Salary\nCA,1,2,high\nNY,3,4,low\nTX,5,6,high\n";
        let opts = ReadOptions {
            drop_columns: vec!["STATE".into()],
            encode_categorical: true,
        };
        let (md, codes) = read_table(text.as_bytes(), &schema(), &opts).unwrap();
        assert_eq!(md.data().column(2), vec![0.0, 1.0, 0.0]);
        assert_eq!(codes["Salary"], vec!["high", "low"]);
        // without the flag a string cell is an error
        let opts = ReadOptions {
            drop_columns: vec!["STATE".into()],
            encode_categorical: false,
        };
        assert!(read_table(text.as_bytes(), &schema(), &opts).is_err());
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(2025.0), "2025");
        assert_eq!(format_value(26.5), "26.5");
        assert_eq!(format_value(0.1), "0.10000000000000001");
        assert_eq!(format_value(-3.0), "-3");
        assert_eq!(format_value(1e300), "1.0000000000000001e300");
        assert_eq!(format_value(1.5e-7), "1.4999999999999999e-7");
    }

    proptest! {
        #[test]
        fn save_load_bit_exact(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 1..15)) {
            let md = Microdata::from_rows(schema(), &rows).unwrap();
            let mut buf = Vec::new();
            write_table(&md, &mut buf).unwrap();
            let back = read_table(buf.as_slice(), &schema(), &ReadOptions::default()).unwrap().0;
            for (a, b) in back.data().as_slice().iter().zip(md.data().as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
