//! Empirical priors from categorical CSV files, and JSON persistence.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::JointDistribution;

/// Which columns of a CSV file hold the secret and the data attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub path: PathBuf,
    pub secret: String,
    pub data: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_missing")]
    pub missing: String,
}

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> String {
    "?".into()
}

impl DatasetSchema {
    pub fn new(path: impl Into<PathBuf>, secret: impl Into<String>, data: Vec<String>) -> Self {
        DatasetSchema {
            path: path.into(),
            secret: secret.into(),
            data,
            delimiter: default_delimiter(),
            missing: default_missing(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::SchemaMismatch("no data columns given".into()));
        }
        if self.data.contains(&self.secret) {
            return Err(Error::SchemaMismatch(format!(
                "column {} is both the secret and a data column",
                self.secret
            )));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::SchemaMismatch("delimiter must be a single ASCII character".into()));
        }
        Ok(())
    }
}

/// Category labels of one column in first-occurrence order; the code of a
/// label is its position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnCodes {
    pub column: String,
    pub labels: Vec<String>,
}

impl ColumnCodes {
    pub fn code(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Codebooks for the secret column followed by every data column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCodebook {
    pub secret: ColumnCodes,
    pub data: Vec<ColumnCodes>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Pseudo-count added to every (s, x) cell; 0 disables smoothing.
    pub smoothing: f64,
    /// Treat each observed data tuple as one category instead of keeping
    /// the attribute product structure.
    pub flatten: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub total: usize,
    pub used: usize,
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub joint: JointDistribution,
    pub codebook: CategoryCodebook,
    pub rows: RowCounts,
}

/// Reads the CSV named by `schema` and builds the empirical joint of the
/// secret and the data attributes. Rows with a missing value in any used
/// column are dropped.
pub fn ingest(schema: &DatasetSchema, opts: IngestOptions) -> Result<Ingested> {
    let file = File::open(&schema.path)?;
    ingest_reader(schema, opts, BufReader::new(file))
}

pub fn ingest_reader<R: std::io::Read>(schema: &DatasetSchema, opts: IngestOptions, reader: R) -> Result<Ingested> {
    schema.validate()?;
    if !(opts.smoothing >= 0.0) || !opts.smoothing.is_finite() {
        return Err(Error::InvalidInput(format!("smoothing must be >= 0, got {}", opts.smoothing)));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("missing column {name}")))
    };
    let secret_col = find(&schema.secret)?;
    let data_cols = schema.data.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut records: Vec<Vec<String>> = Vec::new();
    let mut total = 0;
    for row in rdr.records() {
        let row = row?;
        total += 1;
        let fields: Vec<&str> = std::iter::once(secret_col)
            .chain(data_cols.iter().copied())
            .map(|i| row.get(i).unwrap_or(""))
            .collect();
        if fields.iter().any(|f| f.is_empty() || *f == schema.missing) {
            continue;
        }
        records.push(fields.into_iter().map(String::from).collect());
    }
    let used = records.len();
    if used == 0 {
        return Err(Error::EmptyAfterFiltering);
    }

    // first-occurrence codes per column, over retained rows only
    let ncols = 1 + data_cols.len();
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); ncols];
    let mut index: Vec<HashMap<String, usize>> = vec![HashMap::new(); ncols];
    let coded: Vec<Vec<usize>> = records
        .into_iter()
        .map(|rec| {
            rec.into_iter()
                .enumerate()
                .map(|(k, v)| {
                    *index[k].entry(v.clone()).or_insert_with(|| {
                        labels[k].push(v);
                        labels[k].len() - 1
                    })
                })
                .collect()
        })
        .collect();
    let c = labels[0].len();

    let (a, shape, codes_x): (usize, Option<Vec<usize>>, Vec<usize>) = if opts.flatten && data_cols.len() > 1 {
        // one category per observed tuple, in first-occurrence order
        let mut tuples: HashMap<&[usize], usize> = HashMap::new();
        let codes = coded
            .iter()
            .map(|r| {
                let n = tuples.len();
                *tuples.entry(&r[1..]).or_insert(n)
            })
            .collect();
        (tuples.len(), None, codes)
    } else {
        let shape: Vec<usize> = labels[1..].iter().map(|l| l.len()).collect();
        let codes = coded
            .iter()
            .map(|r| r[1..].iter().zip(&shape).fold(0, |acc, (d, s)| acc * s + d))
            .collect();
        (shape.iter().product(), (data_cols.len() > 1).then_some(shape), codes)
    };

    let mut counts = vec![vec![opts.smoothing; a]; c];
    for (r, &x) in coded.iter().zip(&codes_x) {
        counts[r[0]][x] += 1.0;
    }
    let mut joint = JointDistribution::from_weights(counts)?;
    if let Some(shape) = shape {
        joint = joint.with_shape(shape)?;
    }

    let codebook = CategoryCodebook {
        secret: ColumnCodes {
            column: schema.secret.clone(),
            labels: labels[0].clone(),
        },
        data: schema
            .data
            .iter()
            .zip(&labels[1..])
            .map(|(col, l)| ColumnCodes {
                column: col.clone(),
                labels: l.clone(),
            })
            .collect(),
    };
    Ok(Ingested {
        joint,
        codebook,
        rows: RowCounts {
            total,
            used,
            dropped: total - used,
        },
    })
}

/// Writes `value` as pretty-printed JSON.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads JSON written by [`save_json`]; validation happens in `T`'s deserialiser.
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::sample_jeffreys;

    fn schema(data: &[&str]) -> DatasetSchema {
        DatasetSchema::new("mem.csv", "s", data.iter().map(|s| s.to_string()).collect())
    }

    fn run(text: &str, data: &[&str], opts: IngestOptions) -> Result<Ingested> {
        ingest_reader(&schema(data), opts, text.as_bytes())
    }

    #[test]
    fn direct_counting() {
        let out = run("s,x\na,u\nb,v\na,u\nb,v\n", &["x"], IngestOptions::default()).unwrap();
        assert_eq!(out.joint.matrix(), &[vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert_eq!(out.codebook.secret.labels, vec!["a", "b"]);
        assert_eq!(out.rows, RowCounts { total: 4, used: 4, dropped: 0 });
    }

    #[test]
    fn missing_rows_are_dropped_and_counted() {
        let text = "s,x,z\na,u,1\n?,v,1\nb,v,?\nb,v,2\n\"a\",\"w, quoted\",1\n";
        let out = run(text, &["x"], IngestOptions::default()).unwrap();
        // `?` in the unused column z does not drop a row
        assert_eq!(out.rows, RowCounts { total: 5, used: 4, dropped: 1 });
        assert_eq!(out.codebook.data[0].labels, vec!["u", "v", "w, quoted"]);
        assert_eq!(out.joint.a(), 3);
    }

    #[test]
    fn categories_only_seen_in_dropped_rows_vanish() {
        let out = run("s,x\na,u\n?,ghost\nb,v\n", &["x"], IngestOptions::default()).unwrap();
        assert_eq!(out.codebook.data[0].code("ghost"), None);
        assert!(out.joint.p_x().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(run("s,x\na,u\n", &["y"], IngestOptions::default()), Err(Error::SchemaMismatch(_))));
        assert!(matches!(run("s,x\na,u\n", &["s"], IngestOptions::default()), Err(Error::SchemaMismatch(_))));
        assert!(matches!(run("s,x\n?,u\n", &["x"], IngestOptions::default()), Err(Error::EmptyAfterFiltering)));
    }

    #[test]
    fn attribute_product_and_flattening() {
        let text = "s,x,z\na,u,1\nb,u,2\na,v,1\nb,v,2\n";
        let out = run(text, &["x", "z"], IngestOptions::default()).unwrap();
        assert_eq!(out.joint.shape(), Some(&[2usize, 2][..]));
        assert_eq!(out.joint.get(0, 0), 0.25);
        // (u, 2) and (v, 1) never occur with a: fine, each tuple has some mass
        let sparse = "s,x,z\na,u,1\nb,v,2\n";
        assert!(matches!(run(sparse, &["x", "z"], IngestOptions::default()), Err(Error::ZeroMarginal { .. })));
        let flat = run(sparse, &["x", "z"], IngestOptions { flatten: true, ..Default::default() }).unwrap();
        assert_eq!((flat.joint.a(), flat.joint.shape()), (2, None));
        let smooth = run(sparse, &["x", "z"], IngestOptions { smoothing: 0.5, ..Default::default() }).unwrap();
        assert_eq!(smooth.joint.a(), 4);
        assert!((smooth.joint.get(0, 0) - 1.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn row_order_does_not_change_the_joint() {
        let a = run("s,x\np,u\nq,v\np,v\nq,u\np,u\n", &["x"], IngestOptions::default()).unwrap();
        let b = run("s,x\nq,u\np,u\nq,v\np,u\np,v\n", &["x"], IngestOptions::default()).unwrap();
        for (s, sl) in a.codebook.secret.labels.iter().enumerate() {
            for (x, xl) in a.codebook.data[0].labels.iter().enumerate() {
                let (s2, x2) = (b.codebook.secret.code(sl).unwrap(), b.codebook.data[0].code(xl).unwrap());
                assert_eq!(a.joint.get(s, x), b.joint.get(s2, x2));
            }
        }
    }

    #[test]
    fn custom_delimiter_and_missing_token() {
        let mut sch = schema(&["x"]);
        sch.delimiter = ';';
        sch.missing = "NA".into();
        let out = ingest_reader(&sch, IngestOptions::default(), "s;x\na; u\nNA;v\nb;v\n".as_bytes()).unwrap();
        assert_eq!(out.codebook.data[0].labels, vec!["u", "v"]);
        assert_eq!(out.rows.dropped, 1);
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("joint.json");
        let j = sample_jeffreys(3, 5, 42).unwrap();
        save_json(&path, &j).unwrap();
        let back: JointDistribution = load_json(&path).unwrap();
        assert_eq!(back, j);
        let first = std::fs::read_to_string(&path).unwrap();
        save_json(&path, &back).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
    }

    #[test]
    fn load_rejects_invalid_joints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"c":1,"a":2,"p":[[1.2,-0.2]]}"#).unwrap();
        assert!(load_json::<JointDistribution>(&path).is_err());
        std::fs::write(&path, r#"{"c":1,"a":2,"p":[[0.500001,0.5]]}"#).unwrap();
        assert!(load_json::<JointDistribution>(&path).is_err());
        std::fs::write(&path, r#"{"c":1,"a":2,"p":[[0.5,0.5]]}"#).unwrap();
        assert!(load_json::<JointDistribution>(&path).is_ok());
    }
}
