//! File formats.
//!
//! All multi-byte values are little-endian. Reals are IEEE-754 f64, so
//! write-then-read round-trips are bitwise exact.
//!
//! Tensor file (`DLTNSR01`): magic, version u64, rows u64, cols u64,
//! channels u64, then `channels` blocks of `rows × cols` f64 stored
//! column-major. A plain matrix is a tensor with one channel.
//!
//! Dataset file (`DLDSET01`): the tensor layout, then `cols` labels as u64
//! and one split tag u64 (0 = train, 1 = test).
//!
//! Model archive (`DLMODL01`): magic, version u64, kind u64, then a
//! kind-specific payload built from these primitives: scalar = f64;
//! vec = len u64 + data; mat = rows u64 + cols u64 + data column-major;
//! partition = classes u64 + class sizes + shared size.
//!   kind 1 (fisher/shared): lambda1, lambda2, eta, w, atom partition,
//!     dict, dict0, class_means, shared_mean.
//!   kind 2 (feature-oriented): gamma, rho, class count u64, then per
//!     class sparsity u64 + dict.
//!   kind 3 (incoherent): lambda, eta, class count u64, then dicts.
//!   kind 4 (tensor dictionary): partition, channels u64, then mats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array1;

use crate::data::{LabeledDataset, Samples, Split};
use crate::dfdl::DfdlModel;
use crate::dlsi::DlsiModel;
use crate::error::{Error, Result};
use crate::lrsdl::LrsdlModel;
use crate::mat::{BlockPartition, Mat};
use crate::metrics::MetricsReport;
use crate::tensor3::Tensor3;
use crate::tensor_src::TensorDictionary;

const TENSOR_MAGIC: &[u8; 8] = b"DLTNSR01";
const DATASET_MAGIC: &[u8; 8] = b"DLDSET01";
const MODEL_MAGIC: &[u8; 8] = b"DLMODL01";
const FORMAT_VERSION: u64 = 1;

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn get_usize<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = get_u64(r)?;
    usize::try_from(v).map_err(|_| Error::MalformedFile(format!("{what} out of range")))
}

fn put_mat_body<W: Write>(w: &mut W, m: &Mat) -> Result<()> {
    for col in m.columns() {
        for &v in col.iter() {
            put_f64(w, v)?;
        }
    }
    Ok(())
}

fn get_mat_body<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Mat> {
    let mut m = Mat::zeros((rows, cols));
    for j in 0..cols {
        for i in 0..rows {
            m[[i, j]] = get_f64(r)?;
        }
    }
    Ok(m)
}

fn put_mat<W: Write>(w: &mut W, m: &Mat) -> Result<()> {
    put_u64(w, m.nrows() as u64)?;
    put_u64(w, m.ncols() as u64)?;
    put_mat_body(w, m)
}

fn get_mat<R: Read>(r: &mut R) -> Result<Mat> {
    let rows = get_usize(r, "rows")?;
    let cols = get_usize(r, "cols")?;
    get_mat_body(r, rows, cols)
}

fn put_vec<W: Write>(w: &mut W, v: &Array1<f64>) -> Result<()> {
    put_u64(w, v.len() as u64)?;
    for &x in v.iter() {
        put_f64(w, x)?;
    }
    Ok(())
}

fn get_vec<R: Read>(r: &mut R) -> Result<Array1<f64>> {
    let len = get_usize(r, "vector length")?;
    let mut v = Array1::zeros(len);
    for i in 0..len {
        v[i] = get_f64(r)?;
    }
    Ok(v)
}

fn put_partition<W: Write>(w: &mut W, p: &BlockPartition) -> Result<()> {
    put_u64(w, p.num_classes() as u64)?;
    for &s in p.class_sizes() {
        put_u64(w, s as u64)?;
    }
    put_u64(w, p.shared_size() as u64)
}

fn get_partition<R: Read>(r: &mut R) -> Result<BlockPartition> {
    let classes = get_usize(r, "class count")?;
    let mut sizes = Vec::with_capacity(classes);
    for _ in 0..classes {
        sizes.push(get_usize(r, "class size")?);
    }
    let shared = get_usize(r, "shared size")?;
    BlockPartition::new(sizes, shared)
}

fn check_header<R: Read>(r: &mut R, magic: &[u8; 8], what: &str) -> Result<()> {
    let mut got = [0u8; 8];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(Error::MalformedFile(format!("not a {what} file")));
    }
    let version = get_u64(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::MalformedFile(format!(
            "unsupported {what} version {version}"
        )));
    }
    Ok(())
}

fn tensor_payload<W: Write>(w: &mut W, t: &Tensor3) -> Result<()> {
    put_u64(w, t.rows() as u64)?;
    put_u64(w, t.cols() as u64)?;
    put_u64(w, t.num_channels() as u64)?;
    for ch in t.channels() {
        put_mat_body(w, ch)?;
    }
    Ok(())
}

fn tensor_from<R: Read>(r: &mut R) -> Result<Tensor3> {
    let rows = get_usize(r, "rows")?;
    let cols = get_usize(r, "cols")?;
    let channels = get_usize(r, "channels")?;
    if channels == 0 {
        return Err(Error::MalformedFile("zero channels".into()));
    }
    let mut chans = Vec::with_capacity(channels);
    for _ in 0..channels {
        chans.push(get_mat_body(r, rows, cols)?);
    }
    Tensor3::new(chans)
}

/// Writes a tensor (or single matrix, as one channel).
pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TENSOR_MAGIC)?;
    put_u64(&mut w, FORMAT_VERSION)?;
    tensor_payload(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, TENSOR_MAGIC, "tensor")?;
    tensor_from(&mut r)
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    write_tensor(path, &Tensor3::from_mat(m.clone()))
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let t = read_tensor(path)?;
    if t.num_channels() != 1 {
        return Err(Error::MalformedFile("expected a single channel".into()));
    }
    Ok(t.channel(0).clone())
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    put_u64(&mut w, FORMAT_VERSION)?;
    let tensor_view;
    let t: &Tensor3 = match &ds.samples {
        Samples::Multi(t) => t,
        Samples::Single(m) => {
            tensor_view = Tensor3::from_mat(m.clone());
            &tensor_view
        }
    };
    tensor_payload(&mut w, t)?;
    for &l in &ds.labels {
        put_u64(&mut w, l as u64)?;
    }
    put_u64(&mut w, matches!(ds.split, Split::Test) as u64)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, DATASET_MAGIC, "dataset")?;
    let t = tensor_from(&mut r)?;
    let n = t.cols();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(get_usize(&mut r, "label")?);
    }
    let split = match get_u64(&mut r)? {
        0 => Split::Train,
        1 => Split::Test,
        other => {
            return Err(Error::MalformedFile(format!("unknown split tag {other}")));
        }
    };
    let samples = if t.num_channels() == 1 {
        Samples::Single(t.channel(0).clone())
    } else {
        Samples::Multi(t)
    };
    LabeledDataset::new(samples, labels, split)
}

/// A model archive for whichever learner produced it.
#[derive(Debug, Clone)]
pub enum ModelArchive {
    Lrsdl(LrsdlModel),
    Dfdl(DfdlModel),
    Dlsi(DlsiModel),
    TensorDict(TensorDictionary),
}

pub fn write_model(path: &Path, model: &ModelArchive) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    put_u64(&mut w, FORMAT_VERSION)?;
    match model {
        ModelArchive::Lrsdl(m) => {
            put_u64(&mut w, 1)?;
            put_f64(&mut w, m.lambda1)?;
            put_f64(&mut w, m.lambda2)?;
            put_f64(&mut w, m.eta)?;
            put_f64(&mut w, m.w)?;
            put_partition(&mut w, &m.atoms)?;
            put_mat(&mut w, &m.dict)?;
            put_mat(&mut w, &m.dict0)?;
            put_mat(&mut w, &m.class_means)?;
            put_vec(&mut w, &m.shared_mean)?;
        }
        ModelArchive::Dfdl(m) => {
            put_u64(&mut w, 2)?;
            put_f64(&mut w, m.gamma)?;
            put_f64(&mut w, m.rho)?;
            put_u64(&mut w, m.dicts.len() as u64)?;
            for (dict, &level) in m.dicts.iter().zip(&m.sparsity) {
                put_u64(&mut w, level as u64)?;
                put_mat(&mut w, dict)?;
            }
        }
        ModelArchive::Dlsi(m) => {
            put_u64(&mut w, 3)?;
            put_f64(&mut w, m.lambda)?;
            put_f64(&mut w, m.eta)?;
            put_u64(&mut w, m.dicts.len() as u64)?;
            for dict in &m.dicts {
                put_mat(&mut w, dict)?;
            }
        }
        ModelArchive::TensorDict(m) => {
            put_u64(&mut w, 4)?;
            put_partition(&mut w, &m.partition)?;
            put_u64(&mut w, m.dict.num_channels() as u64)?;
            for ch in m.dict.channels() {
                put_mat(&mut w, ch)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelArchive> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, MODEL_MAGIC, "model")?;
    match get_u64(&mut r)? {
        1 => {
            let lambda1 = get_f64(&mut r)?;
            let lambda2 = get_f64(&mut r)?;
            let eta = get_f64(&mut r)?;
            let w = get_f64(&mut r)?;
            let atoms = get_partition(&mut r)?;
            let dict = get_mat(&mut r)?;
            let dict0 = get_mat(&mut r)?;
            let class_means = get_mat(&mut r)?;
            let shared_mean = get_vec(&mut r)?;
            Ok(ModelArchive::Lrsdl(LrsdlModel {
                dict,
                dict0,
                atoms,
                class_means,
                shared_mean,
                lambda1,
                lambda2,
                eta,
                w,
            }))
        }
        2 => {
            let gamma = get_f64(&mut r)?;
            let rho = get_f64(&mut r)?;
            let classes = get_usize(&mut r, "class count")?;
            let mut dicts = Vec::with_capacity(classes);
            let mut sparsity = Vec::with_capacity(classes);
            for _ in 0..classes {
                sparsity.push(get_usize(&mut r, "sparsity")?);
                dicts.push(get_mat(&mut r)?);
            }
            Ok(ModelArchive::Dfdl(DfdlModel {
                dicts,
                sparsity,
                gamma,
                rho,
            }))
        }
        3 => {
            let lambda = get_f64(&mut r)?;
            let eta = get_f64(&mut r)?;
            let classes = get_usize(&mut r, "class count")?;
            let mut dicts = Vec::with_capacity(classes);
            for _ in 0..classes {
                dicts.push(get_mat(&mut r)?);
            }
            Ok(ModelArchive::Dlsi(DlsiModel { dicts, lambda, eta }))
        }
        4 => {
            let partition = get_partition(&mut r)?;
            let channels = get_usize(&mut r, "channels")?;
            let mut chans = Vec::with_capacity(channels);
            for _ in 0..channels {
                chans.push(get_mat(&mut r)?);
            }
            TensorDictionary::new(Tensor3::new(chans)?, partition).map(ModelArchive::TensorDict)
        }
        other => Err(Error::MalformedFile(format!("unknown model kind {other}"))),
    }
}

pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_metrics_json(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedFile(e.to_string()))
}

/// Predictions file: one `index,label,confuser` row per sample.
pub fn write_predictions(path: &Path, labels: &[usize], confusers: &[bool]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,label,confuser")?;
    for (i, (&l, &c)) in labels.iter().zip(confusers.iter()).enumerate() {
        writeln!(w, "{i},{l},{}", c as u8)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<(Vec<usize>, Vec<bool>)> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    let mut confusers = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedFile(format!(
                "predictions line {} needs 3 fields",
                lineno + 1
            )));
        }
        labels.push(
            fields[1]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedFile(format!("bad label on line {}", lineno + 1)))?,
        );
        confusers.push(fields[2].trim() == "1");
    }
    Ok((labels, confusers))
}

/// Plain CSV export of a matrix, row per line.
pub fn write_matrix_csv(path: &Path, m: &Mat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| {
            Error::MalformedFile(format!("bad number on line {}", lineno + 1))
        })?);
    }
    if rows.is_empty() {
        return Err(Error::MalformedFile("empty csv".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::MalformedFile("ragged csv".into()));
    }
    let mut m = Mat::zeros((rows.len(), cols));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}
