//! Instance and one-bit record dumps for replaying an experiment.
//!
//! A dump directory holds `instance.json` plus three headerless CSV files:
//! `y.csv` (one measurement per line), `R.csv` (`m` lines of `m1` signs,
//! written as `1`/`-1`) and `Gamma.csv` (`m` lines of `m1` thresholds).
//! Floats are written with 17 significant digits so they read back exactly.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::onebit::{OneBitError, OneBitRecord, ThresholdEnsemble};
use crate::qcs::{ProblemInstance, QcsError, SensingEnsemble, SensingKind};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    OneBit(#[from] OneBitError),
    #[error(transparent)]
    Qcs(#[from] QcsError),
}

/// Scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Contents of `instance.json`. `seed` regenerates the sensing ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub m1: usize,
    pub kind: SensingKind,
    pub seed: u64,
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub threshold_sigma: f64,
}

impl InstanceRecord {
    pub fn new(inst: &ProblemInstance, record: &OneBitRecord) -> Self {
        let x = inst.x_true();
        Self {
            n: inst.n(),
            k: inst.sparsity(),
            m: inst.m(),
            m1: record.m1(),
            kind: inst.ensemble().kind(),
            seed: inst.ensemble().seed(),
            support: inst.support().to_vec(),
            values: inst.support().iter().map(|&i| x[i]).collect(),
            threshold_sigma: record.thresholds().sigma(),
        }
    }

    /// Rebuilds the instance; the ensemble is regenerated from `seed`.
    pub fn instance(&self) -> Result<ProblemInstance, QcsError> {
        if self.support.len() != self.values.len() {
            return Err(QcsError::InvalidDims("support and values differ in length".into()));
        }
        let mut x = vec![0.0; self.n];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            *x.get_mut(i).ok_or(QcsError::IndexOutOfRange { index: i, len: self.n })? = v;
        }
        let ens = SensingEnsemble::generate(self.n, self.m, self.kind, self.seed)?;
        ProblemInstance::from_parts(x, ens)
    }
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<I, R>(path: &Path, rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = File::create(path).map_err(fs_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(BufWriter::new(file));
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(csv_err(path))?;
    }
    w.flush().map_err(fs_err(path))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let file = File::open(path).map_err(fs_err(path))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(BufReader::new(file));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| IoError::Format {
                    path: path.to_path_buf(),
                    msg: format!("`{f}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(row);
    }
    Ok(out)
}

fn matrix_rows<'a>(
    m: &'a DenseMatrix,
    fmt: impl Fn(f64) -> String + Copy + 'a,
) -> impl Iterator<Item = Vec<String>> + 'a {
    (0..m.rows()).map(move |r| m.row(r).iter().map(|&v| fmt(v)).collect())
}

fn read_matrix(path: &Path) -> Result<DenseMatrix, IoError> {
    let rows = read_rows(path)?;
    DenseMatrix::from_rows(&rows).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Writes `R.csv` and `Gamma.csv`.
pub fn write_record(dir: &Path, record: &OneBitRecord) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(fs_err(dir))?;
    write_rows(&dir.join("R.csv"), matrix_rows(record.signs(), |v| format!("{}", v as i64)))?;
    write_rows(&dir.join("Gamma.csv"), matrix_rows(record.thresholds().matrix(), fmt_float))
}

/// Reads `R.csv` and `Gamma.csv` back; `sigma` is recorded on the
/// thresholds as given.
pub fn read_record(dir: &Path, sigma: f64) -> Result<OneBitRecord, IoError> {
    let signs = read_matrix(&dir.join("R.csv"))?;
    let gamma = read_matrix(&dir.join("Gamma.csv"))?;
    Ok(OneBitRecord::from_parts(signs, ThresholdEnsemble::from_matrix(gamma, 0.0, sigma)?)?)
}

/// Full dump: `instance.json`, `y.csv`, `R.csv`, `Gamma.csv`.
pub fn write_instance_dump(dir: &Path, inst: &ProblemInstance, record: &OneBitRecord) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(fs_err(dir))?;
    let path = dir.join("instance.json");
    let json = serde_json::to_string_pretty(&InstanceRecord::new(inst, record)).map_err(|source| IoError::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, json + "\n").map_err(fs_err(&path))?;
    write_rows(&dir.join("y.csv"), inst.y().iter().map(|&v| [fmt_float(v)]))?;
    write_record(dir, record)
}

/// Reads a dump written by [`write_instance_dump`].
pub fn read_instance_dump(dir: &Path) -> Result<(ProblemInstance, OneBitRecord), IoError> {
    let path = dir.join("instance.json");
    let text = fs::read_to_string(&path).map_err(fs_err(&path))?;
    let meta: InstanceRecord = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.clone(),
        source,
    })?;
    let inst = meta.instance()?;
    let y_path = dir.join("y.csv");
    let y: Vec<f64> = read_rows(&y_path)?.into_iter().flatten().collect();
    if y != inst.y().as_slice() {
        return Err(IoError::Format {
            path: y_path,
            msg: "stored measurements differ from the regenerated instance".into(),
        });
    }
    let record = read_record(dir, meta.threshold_sigma)?;
    if (record.m(), record.m1()) != (meta.m, meta.m1) {
        return Err(IoError::Format {
            path: dir.to_path_buf(),
            msg: format!("record is {}x{}, instance.json says {}x{}", record.m(), record.m1(), meta.m, meta.m1),
        });
    }
    Ok((inst, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcs::{build_polyhedron, generate_instance, ThresholdConfig};

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = generate_instance(6, 2, 20, SensingKind::FullRank, 8).unwrap();
        let poly = build_polyhedron(&inst, 3, &ThresholdConfig::default(), 9).unwrap();
        write_instance_dump(dir.path(), &inst, poly.record()).unwrap();
        let (inst2, rec2) = read_instance_dump(dir.path()).unwrap();
        assert_eq!(inst2, inst);
        assert_eq!(rec2.signs(), poly.record().signs());
        assert_eq!(rec2.thresholds().matrix(), poly.record().thresholds().matrix());
        let r = std::fs::read_to_string(dir.path().join("R.csv")).unwrap();
        assert!(r.lines().all(|l| l.split(',').all(|f| f == "1" || f == "-1")));
        assert_eq!(r.lines().count(), 20);
    }

    #[test]
    fn corrupt_signs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("R.csv"), "1,0\n").unwrap();
        std::fs::write(dir.path().join("Gamma.csv"), "0.1,0.2\n").unwrap();
        assert!(matches!(read_record(dir.path(), 1.0), Err(IoError::OneBit(_))));
    }
}
