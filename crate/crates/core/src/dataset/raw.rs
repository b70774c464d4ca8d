use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;

use super::matrix::{FeatureMatrix, LabelVector};
use super::schema::{FeatureSchema, LabelLevel, LabelTaxonomy, LABEL_COLUMN};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    /// `None` marks a missing or unparseable cell.
    pub values: Vec<Option<f64>>,
    pub label: String,
    /// False when the label is not in the taxonomy.
    pub known: bool,
}

/// Staged rows as read from disk, before cleaning and encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: Arc<FeatureSchema>,
    pub rows: Vec<RawRow>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub dropped_nonfinite: usize,
    pub dropped_duplicate: usize,
}

impl RawTable {
    pub fn new(schema: Arc<FeatureSchema>) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Concatenates tables in order (deterministic merge of per-file loads).
    pub fn concat(tables: Vec<RawTable>) -> Result<RawTable> {
        let mut it = tables.into_iter();
        let Some(mut first) = it.next() else {
            return Err(Error::EmptyInput("no tables to merge".into()));
        };
        for t in it {
            if t.schema.names() != first.schema.names() {
                return Err(Error::Schema("cannot merge tables with different schemas".into()));
            }
            first.rows.extend(t.rows);
        }
        Ok(first)
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok()
}

/// Reads one CSV shard. Columns are matched by header name, so file order is
/// free; extra columns are ignored.
pub fn load_csv(path: &Path, schema: &Arc<FeatureSchema>, taxonomy: &LabelTaxonomy) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let headers = rdr.headers()?.clone();
    let canon: Vec<&str> = headers.iter().map(FeatureSchema::canonical_header).collect();
    let label_col = canon
        .iter()
        .position(|h| *h == LABEL_COLUMN)
        .ok_or_else(|| Error::Schema(format!("{}: missing `label` column", path.display())))?;
    let mut col_of = Vec::with_capacity(schema.width());
    for name in schema.names() {
        let pos = canon.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!("{}: header lacks column `{name}`", path.display()))
        })?;
        col_of.push(pos);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::AtLine {
                path: path.to_path_buf(),
                line,
                source: Box::new(Error::Csv(e)),
            }
        })?;
        let values = col_of.iter().map(|&c| parse_cell(&rec[c])).collect();
        let label = rec[label_col].trim().to_string();
        let known = taxonomy.is_known(&label);
        rows.push(RawRow { values, label, known });
    }
    Ok(RawTable {
        schema: Arc::clone(schema),
        rows,
    })
}

/// Writes a table as a shard: schema columns then `label`. Missing cells
/// are left empty.
pub fn write_raw_csv(path: &Path, table: &RawTable) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<&str> = table.schema.names().iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for row in &table.rows {
        rec.clear();
        rec.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rec.push(row.label.clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Seeded choice of `count` files out of `files` (all of them when `count`
/// is `None` or not smaller). Output is sorted for a deterministic merge.
pub fn choose_files(files: &[PathBuf], count: Option<usize>, seed: u64) -> Vec<PathBuf> {
    let mut sorted = files.to_vec();
    sorted.sort();
    match count {
        Some(c) if c < sorted.len() => {
            let mut rng = seed::rng(seed);
            sorted.shuffle(&mut rng);
            let mut chosen = sorted[..c].to_vec();
            chosen.sort();
            chosen
        }
        _ => sorted,
    }
}

fn dedup_key(row: &RawRow) -> (Vec<u64>, String) {
    let bits = row
        .values
        .iter()
        .map(|v| {
            let v = v.unwrap_or(f64::NAN);
            // 0.0 and -0.0 compare equal after parsing
            if v == 0.0 { 0 } else { v.to_bits() }
        })
        .collect();
    (bits, row.label.clone())
}

/// Drops rows with missing/non-finite cells, then exact duplicates
/// (features and label); survivors keep their relative order.
pub fn clean(table: &RawTable) -> (RawTable, CleanReport) {
    let mut report = CleanReport::default();
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        if row.values.iter().any(|v| !matches!(v, Some(x) if x.is_finite())) {
            report.dropped_nonfinite += 1;
            continue;
        }
        if !seen.insert(dedup_key(row)) {
            report.dropped_duplicate += 1;
            continue;
        }
        rows.push(row.clone());
    }
    (
        RawTable {
            schema: Arc::clone(&table.schema),
            rows,
        },
        report,
    )
}

/// Converts a clean table into a matrix plus integer labels at `level`.
/// Ids follow the name list of the level (sorted, except binary which is
/// benign, attack); it is returned in the label vector as the mapping.
pub fn encode_labels(
    table: &RawTable,
    taxonomy: &LabelTaxonomy,
    level: LabelLevel,
) -> Result<(FeatureMatrix, LabelVector)> {
    let names = taxonomy.names_at(level);
    let mut offenders: Vec<String> = table
        .rows
        .iter()
        .filter(|r| taxonomy.name_at(&r.label, level).is_none())
        .map(|r| r.label.clone())
        .collect();
    if !offenders.is_empty() {
        offenders.sort();
        offenders.dedup();
        return Err(Error::UnknownLabel(offenders));
    }
    let p = table.schema.width();
    let mut values = Vec::with_capacity(table.rows.len() * p);
    let mut ids = Vec::with_capacity(table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        for v in &r.values {
            match v {
                Some(x) if x.is_finite() => values.push(*x),
                _ => {
                    return Err(Error::Parameter(format!(
                        "row {i} is not clean; run clean() before encoding"
                    )))
                }
            }
        }
        let name = taxonomy.name_at(&r.label, level).expect("checked above");
        let id = names.iter().position(|n| *n == name).expect("name list is complete");
        ids.push(id as u32);
    }
    let matrix = FeatureMatrix::new(Arc::clone(&table.schema), table.rows.len(), values)?;
    Ok((matrix, LabelVector::new(level, ids, names)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema2() -> Arc<FeatureSchema> {
        Arc::new(FeatureSchema::new(vec!["a".into(), "b".into()]).unwrap())
    }

    fn row(a: Option<f64>, b: Option<f64>, label: &str) -> RawRow {
        RawRow {
            values: vec![a, b],
            label: label.into(),
            known: true,
        }
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn load_reads_by_name_and_marks_bad_cells_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "x.csv",
            "b,label,a,extra\n1.5,BenignTraffic,2,9\nabc,DDoS-ICMP_Flood,,0\ninf,Nope,3,1\n",
        );
        let t = load_csv(&p, &schema2(), &LabelTaxonomy::ciciot2023()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows[0].values, vec![Some(2.0), Some(1.5)]);
        assert_eq!(t.rows[1].values, vec![None, None]);
        assert_eq!(t.rows[2].values[1], Some(f64::INFINITY));
        assert!(!t.rows[2].known);
    }

    #[test]
    fn load_empty_file_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "a,b,label\n");
        let t = load_csv(&p, &schema2(), &LabelTaxonomy::ciciot2023()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn load_missing_label_or_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "n.csv", "a,b\n1,2\n");
        let err = load_csv(&p, &schema2(), &LabelTaxonomy::ciciot2023()).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("label")));
        let p = write(dir.path(), "m.csv", "a,label\n1,XSS\n");
        let err = load_csv(&p, &schema2(), &LabelTaxonomy::ciciot2023()).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("`b`")));
    }

    #[test]
    fn magnitude_alias_accepted() {
        assert_eq!(FeatureSchema::canonical_header(" Magnitue"), "Magnitude");
    }

    #[test]
    fn clean_drops_nonfinite_and_duplicates_in_order() {
        let t = RawTable {
            schema: schema2(),
            rows: vec![
                row(Some(1.0), Some(2.0), "XSS"),
                row(Some(f64::INFINITY), Some(2.0), "XSS"),
                row(Some(3.0), Some(4.0), "XSS"),
                row(Some(1.0), Some(2.0), "XSS"),
                row(Some(1.0), Some(2.0), "SqlInjection"),
                row(None, Some(0.0), "XSS"),
            ],
        };
        let (c, rep) = clean(&t);
        assert_eq!(rep.dropped_nonfinite, 2);
        assert_eq!(rep.dropped_duplicate, 1);
        let labels: Vec<_> = c.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["XSS", "XSS", "SqlInjection"]);
        assert_eq!(c.rows[1].values[0], Some(3.0));
        let (again, rep2) = clean(&c);
        assert_eq!(again, c);
        assert_eq!(rep2, CleanReport::default());
    }

    #[test]
    fn clean_five_rows_one_infinite() {
        let mut rows: Vec<RawRow> = (0..5).map(|i| row(Some(i as f64), Some(0.0), "XSS")).collect();
        rows[2].values[1] = Some(f64::INFINITY);
        let (c, rep) = clean(&RawTable { schema: schema2(), rows });
        assert_eq!(c.len(), 4);
        assert_eq!(rep.dropped_nonfinite, 1);
    }

    #[test]
    fn encode_class_and_binary_levels() {
        let tax = LabelTaxonomy::ciciot2023();
        let t = RawTable {
            schema: schema2(),
            rows: vec![
                row(Some(1.0), Some(2.0), "Benign"),
                row(Some(3.0), Some(4.0), "DDoS-ICMP_Flood"),
            ],
        };
        let (_, y) = encode_labels(&t, &tax, LabelLevel::Class).unwrap();
        assert_eq!(y.ids(), &[0, 2]);
        assert_eq!(y.names()[2], "DDoS");
        let (_, yb) = encode_labels(&t, &tax, LabelLevel::Binary).unwrap();
        assert_eq!(yb.ids(), &[0, 1]);
    }

    #[test]
    fn encode_unknown_label_lists_offenders() {
        let t = RawTable {
            schema: schema2(),
            rows: vec![
                row(Some(1.0), Some(2.0), "NotARealAttack"),
                row(Some(1.0), Some(3.0), "XSS"),
            ],
        };
        let err = encode_labels(&t, &LabelTaxonomy::ciciot2023(), LabelLevel::Class).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel(ref v) if v == &["NotARealAttack".to_string()]));
    }

    #[test]
    fn choose_files_is_seeded_subset() {
        let files: Vec<PathBuf> = (0..169).map(|i| PathBuf::from(format!("part-{i:03}.csv"))).collect();
        let a = choose_files(&files, Some(18), 11);
        assert_eq!(a.len(), 18);
        assert_eq!(a, choose_files(&files, Some(18), 11));
        assert_ne!(a, choose_files(&files, Some(18), 12));
        assert_eq!(choose_files(&files, None, 0).len(), 169);
    }
}
