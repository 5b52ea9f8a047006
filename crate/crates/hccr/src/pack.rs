//! Record-pack files: an indexed, fixed-stride store of preprocessed samples.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "HZPK" | version u16 | classes u32 | classes x 2-byte tag | samples u64
//! samples x (label u32 | 16384 quantized pixel bytes)
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use hccr_core::dataset::{dequantize, DatasetPack, PreprocessedSample, TagCode, IMAGE_PIXELS};

use crate::error::{Error, IoContext, Result};

pub const PACK_MAGIC: [u8; 4] = *b"HZPK";
pub const PACK_VERSION: u16 = 1;
pub const RECORD_LEN: usize = 4 + IMAGE_PIXELS;

fn header_len(classes: usize) -> usize {
    4 + 2 + 4 + 2 * classes + 8
}

pub fn encode_pack(pack: &DatasetPack) -> Vec<u8> {
    let classes = pack.num_classes();
    let mut out = Vec::with_capacity(header_len(classes) + pack.len() * RECORD_LEN);
    out.extend_from_slice(&PACK_MAGIC);
    out.extend_from_slice(&PACK_VERSION.to_le_bytes());
    out.extend_from_slice(&(classes as u32).to_le_bytes());
    for tag in pack.label_table() {
        out.extend_from_slice(&tag.0);
    }
    out.extend_from_slice(&(pack.len() as u64).to_le_bytes());
    for i in 0..pack.len() {
        out.extend_from_slice(&(pack.label(i) as u32).to_le_bytes());
        out.extend_from_slice(pack.pixels(i));
    }
    out
}

pub fn write_pack(pack: &DatasetPack, path: &Path) -> Result<()> {
    let file = File::create(path).at(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_pack(pack)).at(path)?;
    w.flush().at(path)
}

struct Header {
    label_table: Vec<TagCode>,
    samples: u64,
    len: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let need = |n: usize, what: &str| {
        if bytes.len() < n {
            Err(Error::Format(format!("truncated pack header: {what} needs {n} bytes, file has {}", bytes.len())))
        } else {
            Ok(())
        }
    };
    need(6, "magic and version")?;
    if bytes[..4] != PACK_MAGIC {
        return Err(Error::Format(format!("bad magic {:02X?}, expected \"HZPK\"", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != PACK_VERSION {
        return Err(Error::Format(format!("pack version {version}, this build reads {PACK_VERSION}")));
    }
    need(10, "class count")?;
    let classes = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let len = header_len(classes);
    need(len, "label table and sample count")?;
    let label_table = bytes[10..10 + 2 * classes].chunks_exact(2).map(|c| TagCode([c[0], c[1]])).collect();
    let samples = u64::from_le_bytes(bytes[len - 8..len].try_into().expect("8 bytes"));
    Ok(Header { label_table, samples, len })
}

pub fn decode_pack(bytes: &[u8]) -> Result<DatasetPack> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.len..];
    let expected = (header.samples as usize).checked_mul(RECORD_LEN).ok_or_else(|| {
        Error::Format(format!("sample count {} overflows", header.samples))
    })?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "{} samples need {} record bytes, found {}",
            header.samples,
            expected,
            body.len()
        )));
    }
    let mut labels = Vec::with_capacity(header.samples as usize);
    let mut pixels = Vec::with_capacity(expected - 4 * header.samples as usize);
    for record in body.chunks_exact(RECORD_LEN) {
        labels.push(u32::from_le_bytes(record[..4].try_into().expect("4 bytes")));
        pixels.extend_from_slice(&record[4..]);
    }
    Ok(DatasetPack::from_parts(header.label_table, labels, pixels)?)
}

pub fn read_pack(path: &Path) -> Result<DatasetPack> {
    let bytes = std::fs::read(path).at(path)?;
    decode_pack(&bytes)
}

/// Random access to a pack on disk without loading the pixels.
///
/// Each reader owns its file handle; open one reader per thread for
/// concurrent access.
pub struct PackReader {
    path: PathBuf,
    file: File,
    label_table: Vec<TagCode>,
    labels: Vec<u32>,
    by_class: Vec<Vec<usize>>,
    data_start: u64,
}

impl PackReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).at(path)?;
        let file_len = file.metadata().at(path)?.len();
        let mut head = vec![0u8; 10];
        let got = file.read(&mut head).at(path)?;
        head.truncate(got);
        let classes = if got >= 10 { u32::from_le_bytes(head[6..10].try_into().expect("4 bytes")) as usize } else { 0 };
        let hlen = header_len(classes);
        if (hlen as u64) <= file_len {
            head.resize(hlen, 0);
            file.seek(SeekFrom::Start(0)).at(path)?;
            file.read_exact(&mut head).at(path)?;
        }
        let header = parse_header(&head)?;
        let expected = header.samples.checked_mul(RECORD_LEN as u64);
        if expected != Some(file_len - hlen as u64) {
            return Err(Error::Format(format!(
                "{} samples need {} record bytes, found {}",
                header.samples,
                header.samples.saturating_mul(RECORD_LEN as u64),
                file_len - hlen as u64
            )));
        }
        let mut labels = Vec::with_capacity(header.samples as usize);
        let mut by_class = vec![Vec::new(); header.label_table.len()];
        let mut buf = [0u8; 4];
        for i in 0..header.samples {
            file.seek(SeekFrom::Start(hlen as u64 + i * RECORD_LEN as u64)).at(path)?;
            file.read_exact(&mut buf).at(path)?;
            let label = u32::from_le_bytes(buf);
            let class = by_class.get_mut(label as usize).ok_or_else(|| {
                Error::Format(format!("sample {i} has label {label}, pack has {} classes", header.label_table.len()))
            })?;
            class.push(i as usize);
            labels.push(label);
        }
        Ok(Self { path: path.to_path_buf(), file, label_table: header.label_table, labels, by_class, data_start: hlen as u64 })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_table(&self) -> &[TagCode] {
        &self.label_table
    }

    pub fn class_samples(&self, class: usize) -> &[usize] {
        &self.by_class[class]
    }

    /// Quantized pixels of sample `i`, read with one seek.
    pub fn pixels(&mut self, i: usize) -> Result<Vec<u8>> {
        if i >= self.len() {
            return Err(Error::Format(format!("sample {i} out of range ({} samples)", self.len())));
        }
        let at = self.data_start + (i * RECORD_LEN + 4) as u64;
        self.file.seek(SeekFrom::Start(at)).at(&self.path)?;
        let mut out = vec![0u8; IMAGE_PIXELS];
        self.file.read_exact(&mut out).at(&self.path)?;
        Ok(out)
    }

    pub fn sample(&mut self, i: usize) -> Result<PreprocessedSample> {
        let image = self.pixels(i)?.into_iter().map(dequantize).collect();
        Ok(PreprocessedSample { label: self.labels[i] as usize, image })
    }
}
