//! File formats.
//!
//! MWT1 binary tensors: the 4 bytes `MWT1`, the order `N` as a
//! little-endian `u32`, `N` little-endian `u64` extents, then the entries
//! as little-endian `f64` in column-major order (first index fastest).
//!
//! Model documents are JSON; their layouts are pinned by the schema files
//! under `schemas/`. Matrices are `{rows, cols, data}` with `data` column
//! major. Tucker cores are embedded as base64 MWT1; TT models are a JSON
//! header naming one MWT1 file per carriage.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::btd::Ll1Term;
use crate::cpd::CPModel;
use crate::error::{Result, TensorError};
use crate::kron_cs::{KronDictionary, SparseCore};
use crate::linalg::Matrix;
use crate::tensor::DenseTensor;
use crate::tt::TTModel;
use crate::tucker::TuckerModel;

pub const MWT1_MAGIC: &[u8; 4] = b"MWT1";

/// Largest order accepted when reading; guards allocation on corrupt headers.
const MAX_ORDER: u32 = 64;

pub const CP_SCHEMA: &str = include_str!("../schemas/cp.schema.json");
pub const TUCKER_SCHEMA: &str = include_str!("../schemas/tucker.schema.json");
pub const BTD_SCHEMA: &str = include_str!("../schemas/btd.schema.json");
pub const TT_SCHEMA: &str = include_str!("../schemas/tt.schema.json");
pub const SPARSE_CORE_SCHEMA: &str = include_str!("../schemas/sparse_core.schema.json");
pub const KRON_DICTIONARY_SCHEMA: &str = include_str!("../schemas/kron_dictionary.schema.json");

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Format(msg.into()))
}

pub fn encode_mwt1(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.order() + 8 * t.len());
    out.extend_from_slice(MWT1_MAGIC);
    out.extend_from_slice(&(t.order() as u32).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a complete MWT1 buffer; trailing bytes are an error.
pub fn decode_mwt1(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 8 {
        return format_err(format!("{} bytes is shorter than the MWT1 header", bytes.len()));
    }
    if &bytes[..4] != MWT1_MAGIC {
        return format_err(format!("bad magic {:?}, expected \"MWT1\"", String::from_utf8_lossy(&bytes[..4])));
    }
    let order = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if order == 0 || order > MAX_ORDER {
        return format_err(format!("order {order} outside 1..={MAX_ORDER}"));
    }
    let order = order as usize;
    let header = 8 + 8 * order;
    if bytes.len() < header {
        return format_err("file ends inside the extent list");
    }
    let mut shape = Vec::with_capacity(order);
    let mut count: usize = 1;
    for n in 0..order {
        let at = 8 + 8 * n;
        let e = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let e = usize::try_from(e).map_err(|_| TensorError::Format(format!("extent {e} too large")))?;
        count = count
            .checked_mul(e)
            .filter(|c| c.checked_mul(8).is_some())
            .ok_or_else(|| TensorError::Format("element count overflows".into()))?;
        shape.push(e);
    }
    let body = &bytes[header..];
    if body.len() != 8 * count {
        return format_err(format!("expected {} data bytes for shape {shape:?}, found {}", 8 * count, body.len()));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    DenseTensor::new(shape, data)
}

pub fn read_mwt1<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_mwt1(&buf)
}

pub fn write_mwt1<W: Write>(mut w: W, t: &DenseTensor) -> Result<()> {
    w.write_all(&encode_mwt1(t))?;
    Ok(())
}

pub fn read_mwt1_file(path: impl AsRef<Path>) -> Result<DenseTensor> {
    decode_mwt1(&fs::read(path)?)
}

pub fn write_mwt1_file(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    write_atomic(path, &encode_mwt1(t))
}

/// Writes to a temporary file in the target directory, then renames it
/// over `path`, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| TensorError::Io(e.error))?;
    Ok(())
}

/// Reads a headerless numeric CSV as a `rows x cols` tensor. Rows must all
/// have the same length; blank lines are skipped.
pub fn read_csv_matrix<R: Read>(r: R) -> Result<DenseTensor> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| TensorError::Format(format!("row {}: {cell:?} is not a number", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return format_err("CSV has no data");
    }
    let m = Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    Ok(DenseTensor::from(m))
}

pub fn read_csv_matrix_file(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_csv_matrix(fs::File::open(path)?)
}

/// Dense matrix as stored in model documents (column major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixDoc {
    fn from(m: &Matrix) -> Self {
        Self { rows: m.rows(), cols: m.cols(), data: m.data().to_vec() }
    }
}

impl MatrixDoc {
    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::new(self.rows, self.cols, self.data.clone())
    }
}

fn check_kind(found: &str, expected: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        format_err(format!("document kind {found:?}, expected {expected:?}"))
    }
}

fn check_version(v: u32) -> Result<()> {
    if v == 1 {
        Ok(())
    } else {
        format_err(format!("unsupported document version {v}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpDoc {
    pub kind: String,
    pub version: u32,
    pub shape: Vec<usize>,
    pub rank: usize,
    pub weights: Vec<f64>,
    pub factors: Vec<MatrixDoc>,
}

impl CpDoc {
    pub fn from_model(m: &CPModel) -> Self {
        Self {
            kind: "cp".into(),
            version: 1,
            shape: m.shape(),
            rank: m.rank(),
            weights: m.weights().to_vec(),
            factors: m.factors().iter().map(MatrixDoc::from).collect(),
        }
    }

    pub fn to_model(&self) -> Result<CPModel> {
        check_kind(&self.kind, "cp")?;
        check_version(self.version)?;
        let factors = self.factors.iter().map(MatrixDoc::to_matrix).collect::<Result<Vec<_>>>()?;
        let m = CPModel::new(self.weights.clone(), factors)?;
        if m.shape() != self.shape || m.rank() != self.rank {
            return format_err("CP document shape or rank disagrees with its factors");
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuckerDoc {
    pub kind: String,
    pub version: u32,
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    pub factors: Vec<MatrixDoc>,
    /// Base64 of the core's MWT1 encoding.
    pub core_mwt1: String,
}

impl TuckerDoc {
    pub fn from_model(m: &TuckerModel) -> Self {
        Self {
            kind: "tucker".into(),
            version: 1,
            shape: m.shape(),
            ranks: m.ranks(),
            factors: m.factors.iter().map(MatrixDoc::from).collect(),
            core_mwt1: B64.encode(encode_mwt1(&m.core)),
        }
    }

    pub fn to_model(&self) -> Result<TuckerModel> {
        check_kind(&self.kind, "tucker")?;
        check_version(self.version)?;
        let raw = B64.decode(&self.core_mwt1).map_err(|e| TensorError::Format(format!("core is not base64: {e}")))?;
        let core = decode_mwt1(&raw)?;
        let factors = self.factors.iter().map(MatrixDoc::to_matrix).collect::<Result<Vec<_>>>()?;
        let m = TuckerModel::new(core, factors)?;
        if m.shape() != self.shape || m.ranks() != self.ranks {
            return format_err("Tucker document shape or ranks disagree with its contents");
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ll1TermDoc {
    pub a: MatrixDoc,
    pub b: MatrixDoc,
    pub c: Vec<f64>,
}

/// Block-term model with `(L, L, 1)` terms `(A_r B_rᵀ) ∘ c_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BtdDoc {
    pub kind: String,
    pub version: u32,
    pub shape: Vec<usize>,
    pub block_size: usize,
    pub terms: Vec<Ll1TermDoc>,
}

impl BtdDoc {
    pub fn from_terms(terms: &[Ll1Term]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| TensorError::InvalidArgument("no terms".into()))?;
        Ok(Self {
            kind: "btd-ll1".into(),
            version: 1,
            shape: first.shape().to_vec(),
            block_size: first.block_size(),
            terms: terms
                .iter()
                .map(|t| Ll1TermDoc { a: (&t.a).into(), b: (&t.b).into(), c: t.c.clone() })
                .collect(),
        })
    }

    pub fn to_terms(&self) -> Result<Vec<Ll1Term>> {
        check_kind(&self.kind, "btd-ll1")?;
        check_version(self.version)?;
        let terms = self
            .terms
            .iter()
            .map(|t| Ll1Term::new(t.a.to_matrix()?, t.b.to_matrix()?, t.c.clone()))
            .collect::<Result<Vec<_>>>()?;
        if terms.iter().any(|t| t.shape()[..] != self.shape[..] || t.block_size() != self.block_size) {
            return format_err("BTD document terms disagree with its shape or block size");
        }
        Ok(terms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtDoc {
    pub kind: String,
    pub version: u32,
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    /// MWT1 carriage files, relative to the header's directory.
    pub carriages: Vec<String>,
}

fn carriage_name(header: &Path, k: usize) -> String {
    let stem = header.file_stem().map_or_else(|| "tt".into(), |s| s.to_string_lossy().into_owned());
    format!("{stem}.carriage{k}.mwt")
}

/// Writes `header` plus one MWT1 file per carriage beside it.
pub fn write_tt(header: impl AsRef<Path>, m: &TTModel) -> Result<Vec<PathBuf>> {
    let header = header.as_ref();
    let dir = header.parent().unwrap_or(Path::new(""));
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (k, g) in m.carriages().iter().enumerate() {
        let name = carriage_name(header, k);
        let path = dir.join(&name);
        write_mwt1_file(&path, g)?;
        written.push(path);
        names.push(name);
    }
    let doc = TtDoc { kind: "tt".into(), version: 1, shape: m.shape(), ranks: m.ranks(), carriages: names };
    write_atomic(header, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    written.push(header.to_path_buf());
    Ok(written)
}

pub fn read_tt(header: impl AsRef<Path>) -> Result<TTModel> {
    let header = header.as_ref();
    let doc: TtDoc = serde_json::from_slice(&fs::read(header)?)?;
    check_kind(&doc.kind, "tt")?;
    check_version(doc.version)?;
    let dir = header.parent().unwrap_or(Path::new(""));
    let carriages = doc
        .carriages
        .iter()
        .map(|name| {
            if Path::new(name).components().count() != 1 {
                return format_err(format!("carriage name {name:?} must be a bare file name"));
            }
            read_mwt1_file(dir.join(name))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = TTModel::new(carriages)?;
    if m.shape() != doc.shape || m.ranks() != doc.ranks {
        return format_err("TT header disagrees with its carriages");
    }
    Ok(m)
}

/// Kronecker dictionary `W_n = Φ_n B_n` given by its sensing and basis
/// matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KronDictionaryDoc {
    pub kind: String,
    pub version: u32,
    pub sensing: Vec<MatrixDoc>,
    pub bases: Vec<MatrixDoc>,
}

impl KronDictionaryDoc {
    pub fn from_dictionary(d: &KronDictionary) -> Self {
        Self {
            kind: "kron-dictionary".into(),
            version: 1,
            sensing: d.sensing().iter().map(MatrixDoc::from).collect(),
            bases: d.bases().iter().map(MatrixDoc::from).collect(),
        }
    }

    pub fn to_dictionary(&self) -> Result<KronDictionary> {
        check_kind(&self.kind, "kron-dictionary")?;
        check_version(self.version)?;
        let sensing = self.sensing.iter().map(MatrixDoc::to_matrix).collect::<Result<Vec<_>>>()?;
        let bases = self.bases.iter().map(MatrixDoc::to_matrix).collect::<Result<Vec<_>>>()?;
        KronDictionary::new(sensing, bases)
    }
}

pub fn sparse_core_to_json(c: &SparseCore) -> Result<String> {
    Ok(serde_json::to_string_pretty(c)?)
}

pub fn sparse_core_from_json(s: &str) -> Result<SparseCore> {
    Ok(serde_json::from_str(s)?)
}

/// Serializes `value` as pretty JSON with a trailing newline and writes it
/// atomically.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> DenseTensor {
        DenseTensor::from_fn(&[2, 3, 4], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64 - 0.5).unwrap()
    }

    #[test]
    fn mwt1_layout_is_exact() {
        let t = DenseTensor::new(vec![2, 1], vec![1.0, -2.0]).unwrap();
        let mut expected = b"MWT1".to_vec();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(encode_mwt1(&t), expected);
    }

    #[test]
    fn mwt1_round_trip() {
        let t = sample();
        assert_eq!(decode_mwt1(&encode_mwt1(&t)).unwrap(), t);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.mwt");
        write_mwt1_file(&p, &t).unwrap();
        assert_eq!(read_mwt1_file(&p).unwrap(), t);
    }

    #[test]
    fn mwt1_rejects_corruption() {
        let good = encode_mwt1(&sample());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_mwt1(&bad), Err(TensorError::Format(_))));
        assert!(decode_mwt1(&good[..good.len() - 1]).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(decode_mwt1(&extra).is_err());
        let mut huge = b"MWT1".to_vec();
        huge.extend_from_slice(&2u32.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_mwt1(&huge).is_err());
        assert!(decode_mwt1(b"MWT1\0\0\0\0").is_err());
    }

    #[test]
    fn csv_reader() {
        let t = read_csv_matrix("1, 2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.get(&[1, 0]).unwrap(), 4.0);
        assert!(read_csv_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(read_csv_matrix("1,a\n".as_bytes()).is_err());
        assert!(read_csv_matrix("".as_bytes()).is_err());
    }

    #[test]
    fn model_documents_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cp = CPModel::from_factors(vec![
            Matrix::random_normal(3, 2, &mut rng),
            Matrix::random_normal(4, 2, &mut rng),
        ])
        .unwrap();
        let doc: CpDoc = serde_json::from_str(&serde_json::to_string(&CpDoc::from_model(&cp)).unwrap()).unwrap();
        assert_eq!(doc.to_model().unwrap(), cp);

        let tk = crate::tucker::truncated_mlsvd(&sample(), &[2, 2, 2]).unwrap();
        let doc: TuckerDoc = serde_json::from_str(&serde_json::to_string(&TuckerDoc::from_model(&tk)).unwrap()).unwrap();
        assert_eq!(doc.to_model().unwrap(), tk);

        let term = Ll1Term::new(Matrix::random_normal(3, 2, &mut rng), Matrix::random_normal(4, 2, &mut rng), vec![1.0, 2.0]).unwrap();
        let doc = BtdDoc::from_terms(std::slice::from_ref(&term)).unwrap();
        assert_eq!(doc.to_terms().unwrap(), vec![term]);
    }

    #[test]
    fn tt_header_and_carriages() {
        let m = crate::tt::tt_svd(&sample(), 1e-12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let header = dir.path().join("model.json");
        let files = write_tt(&header, &m).unwrap();
        assert_eq!(files.len(), 4);
        assert_eq!(read_tt(&header).unwrap(), m);
    }

    #[test]
    fn sparse_core_json() {
        let mut c = SparseCore::new(vec![2, 3]).unwrap();
        c.insert(vec![1, 2], 4.5).unwrap();
        assert_eq!(sparse_core_from_json(&sparse_core_to_json(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn dictionary_document_round_trip() {
        let d = crate::kron_cs::dct_dictionary(&[6, 6, 2], 0.5, 3).unwrap();
        let doc = KronDictionaryDoc::from_dictionary(&d);
        let back: KronDictionaryDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back.to_dictionary().unwrap(), d);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let mut doc = TuckerDoc::from_model(&crate::tucker::truncated_mlsvd(&sample(), &[1, 1, 1]).unwrap());
        doc.kind = "cp".into();
        assert!(doc.to_model().is_err());
    }
}
