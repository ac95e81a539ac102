//! CSV files with header `x0,…,x{d-1},label`; the label is empty for OOD rows.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Benchmark, DatasetSplit, SplitRole};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn split_to_csv<W: Write>(split: &DatasetSplit, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let d = split.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_io)?;
    let mut record = Vec::with_capacity(d + 1);
    for (r, row) in split.features.row_iter().enumerate() {
        record.clear();
        // `{}` prints the shortest string that parses back to the same f64.
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(
            split
                .labels
                .as_ref()
                .map_or_else(String::new, |l| l[r].to_string()),
        );
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn split_from_csv<R: Read>(reader: R, role: SplitRole, origin: &Path) -> Result<DatasetSplit> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rd
        .headers()
        .map_err(|e| Error::parse(origin, e.to_string()))?
        .clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = (0..d)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(
            origin,
            format!("expected header {}", expected.join(",")),
        ));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut any_label = false;
    let mut any_empty = false;
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(origin, format!("line {line}: {e}")))?;
        if rec.len() != d + 1 {
            return Err(Error::parse(
                origin,
                format!("line {line}: {} fields, expected {}", rec.len(), d + 1),
            ));
        }
        for field in rec.iter().take(d) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(origin, format!("line {line}: bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(origin, format!("line {line}: non-finite value")));
            }
            data.push(v);
        }
        let label = &rec[d];
        if label.is_empty() {
            any_empty = true;
        } else {
            any_label = true;
            labels.push(
                label
                    .parse::<usize>()
                    .map_err(|_| Error::parse(origin, format!("line {line}: bad label {label:?}")))?,
            );
        }
    }
    if any_label && any_empty {
        return Err(Error::parse(origin, "file mixes labeled and unlabeled rows"));
    }
    let rows = data.len() / d;
    let features = Matrix::from_vec(rows, d, data)?;
    DatasetSplit::new(features, any_label.then_some(labels), role)
        .map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn write_split(split: &DatasetSplit, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    split_to_csv(split, std::io::BufWriter::new(file))
}

/// Reads a split and checks its labels against `role`.
pub fn read_split(path: impl AsRef<Path>, role: SplitRole) -> Result<DatasetSplit> {
    let path = path.as_ref();
    let file = File::open(path)?;
    split_from_csv(std::io::BufReader::new(file), role, path)
}

/// Writes every split of `benchmark` as `<role>.csv` into `dir` and returns
/// the file names in write order.
pub fn save_benchmark(benchmark: &Benchmark, dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for role in SplitRole::ALL {
        if let Some(split) = benchmark.split(role) {
            write_split(split, dir.join(role.file_name()))?;
            names.push(role.file_name());
        }
    }
    Ok(names)
}

/// Reads a directory written by [`save_benchmark`]. `train_ood.csv` is
/// optional; every other split must be present.
pub fn load_benchmark(dir: impl AsRef<Path>) -> Result<Benchmark> {
    let dir = dir.as_ref();
    let load = |role: SplitRole| -> Result<Option<DatasetSplit>> {
        let path = dir.join(role.file_name());
        if !path.is_file() {
            return Ok(None);
        }
        read_split(&path, role).map(Some)
    };
    let need = |role: SplitRole| -> Result<DatasetSplit> {
        load(role)?.ok_or_else(|| {
            Error::MissingInput(format!("{} not found in {}", role.file_name(), dir.display()))
        })
    };
    let benchmark = Benchmark {
        train: need(SplitRole::Train)?,
        val: need(SplitRole::Val)?,
        test_id: need(SplitRole::TestId)?,
        test_ood: need(SplitRole::TestOod)?,
        train_ood: load(SplitRole::TrainOod)?,
    };
    let d = benchmark.train.dim();
    for role in SplitRole::ALL {
        if let Some(s) = benchmark.split(role) {
            if s.dim() != d {
                return Err(Error::parse(
                    dir.join(role.file_name()),
                    format!("{} features, train has {d}", s.dim()),
                ));
            }
        }
    }
    Ok(benchmark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_default_benchmark;
    use proptest::prelude::*;

    fn round_trip(split: &DatasetSplit) -> DatasetSplit {
        let mut buf = Vec::new();
        split_to_csv(split, &mut buf).unwrap();
        split_from_csv(buf.as_slice(), split.role, Path::new("mem")).unwrap()
    }

    #[test]
    fn labeled_and_ood_round_trip() {
        let b = make_default_benchmark(2).unwrap();
        assert_eq!(round_trip(&b.train), b.train);
        assert_eq!(round_trip(&b.test_ood), b.test_ood);
        let mut buf = Vec::new();
        split_to_csv(&b.test_ood, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,x1,label\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn benchmark_directory_round_trip() {
        let b = make_default_benchmark(5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(save_benchmark(&b, dir.path()).unwrap().len(), 5);
        assert_eq!(load_benchmark(dir.path()).unwrap(), b);

        std::fs::remove_file(dir.path().join("train_ood.csv")).unwrap();
        assert!(load_benchmark(dir.path()).unwrap().train_ood.is_none());
        std::fs::remove_file(dir.path().join("val.csv")).unwrap();
        let err = load_benchmark(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingInput(ref m) if m.contains("val.csv")));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let p = Path::new("mem");
        let bad = [
            "x0,x1\n1,2\n",
            "x0,x1,label\n1,2\n",
            "x0,x1,label\n1,abc,0\n",
            "x0,x1,label\n1,2,0\n3,4,\n",
            "x0,x1,label\n1,2,-1\n",
            "a,b,label\n1,2,0\n",
        ];
        for text in bad {
            assert!(
                matches!(split_from_csv(text.as_bytes(), SplitRole::Train, p), Err(Error::Parse { .. })),
                "{text:?}"
            );
        }
        // labeled file read as OOD violates the role invariant
        assert!(split_from_csv("x0,x1,label\n1,2,0\n".as_bytes(), SplitRole::TestOod, p).is_err());
    }

    #[test]
    fn large_split_is_fast() {
        let rows: Vec<[f64; 2]> = (0..100_000).map(|i| [i as f64 * 0.1234567891, -(i as f64).sqrt()]).collect();
        let split = DatasetSplit::new(Matrix::from_rows(&rows).unwrap(), None, SplitRole::TestOod).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.csv");
        let t = std::time::Instant::now();
        write_split(&split, &path).unwrap();
        let back = read_split(&path, SplitRole::TestOod).unwrap();
        assert!(t.elapsed().as_secs_f64() < 2.0);
        assert_eq!(back, split);
    }

    proptest! {
        #[test]
        fn values_round_trip_exactly(
            rows in prop::collection::vec((any::<f64>(), -1e300f64..1e300, 0usize..5), 1..40)
        ) {
            let rows: Vec<_> = rows.into_iter().filter(|(a, _, _)| a.is_finite()).collect();
            prop_assume!(!rows.is_empty());
            let feats: Vec<[f64; 2]> = rows.iter().map(|(a, b, _)| [*a, *b]).collect();
            let labels = rows.iter().map(|r| r.2).collect();
            let split = DatasetSplit::new(Matrix::from_rows(&feats).unwrap(), Some(labels), SplitRole::Val).unwrap();
            prop_assert_eq!(round_trip(&split), split);
        }
    }
}
