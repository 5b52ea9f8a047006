//! GNT handwriting files: a plain concatenation of records, each
//! `size: u32 LE | tag: 2 bytes | width: u16 LE | height: u16 LE | bitmap`.

use std::io::{self, Read};

use hccr_core::dataset::{GntRecord, TagCode, GNT_HEADER_LEN};

use crate::error::{Error, Result};

/// Streams records from any reader, tracking the byte offset of each record.
pub struct GntReader<R> {
    inner: R,
    offset: u64,
    done: bool,
}

impl<R: Read> GntReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0, done: false }
    }

    /// Byte offset of the next record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn fail(&mut self, offset: u64, message: String) -> Option<Result<GntRecord>> {
        self.done = true;
        Some(Err(Error::Gnt { offset, message }))
    }
}

/// Fills `buf` as far as the stream allows and returns the byte count read.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> Iterator for GntReader<R> {
    type Item = Result<GntRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let start = self.offset;
        let mut header = [0u8; GNT_HEADER_LEN];
        let got = match read_full(&mut self.inner, &mut header) {
            Ok(n) => n,
            Err(e) => return self.fail(start, format!("read failed: {e}")),
        };
        if got == 0 {
            self.done = true;
            return None;
        }
        if got < GNT_HEADER_LEN {
            return self.fail(start, format!("truncated header: {got} of {GNT_HEADER_LEN} bytes"));
        }
        let size = u32::from_le_bytes([header[0], header[1], header[2], header[3]]);
        let tag = TagCode([header[4], header[5]]);
        let width = u16::from_le_bytes([header[6], header[7]]);
        let height = u16::from_le_bytes([header[8], header[9]]);
        if width == 0 || height == 0 {
            return self.fail(start, format!("zero-sized bitmap {width}x{height}"));
        }
        let pixels = width as usize * height as usize;
        if size as usize != GNT_HEADER_LEN + pixels {
            return self.fail(
                start,
                format!("sample size {size} does not match {width}x{height} (expected {})", GNT_HEADER_LEN + pixels),
            );
        }
        let mut bitmap = vec![0u8; pixels];
        match read_full(&mut self.inner, &mut bitmap) {
            Ok(n) if n == pixels => {}
            Ok(n) => return self.fail(start, format!("truncated bitmap: {n} of {pixels} bytes")),
            Err(e) => return self.fail(start, format!("read failed: {e}")),
        }
        self.offset += size as u64;
        Some(Ok(GntRecord { tag_code: tag, width, height, bitmap }))
    }
}

/// Parses a whole GNT byte stream.
pub fn parse_gnt(bytes: &[u8]) -> Result<Vec<GntRecord>> {
    GntReader::new(bytes).collect()
}

/// Writes one record, validating it first.
pub fn write_record(out: &mut Vec<u8>, record: &GntRecord) -> Result<()> {
    record.validate()?;
    out.extend_from_slice(&record.sample_size().to_le_bytes());
    out.extend_from_slice(&record.tag_code.0);
    out.extend_from_slice(&record.width.to_le_bytes());
    out.extend_from_slice(&record.height.to_le_bytes());
    out.extend_from_slice(&record.bitmap);
    Ok(())
}

pub fn serialize_gnt(records: &[GntRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(records.iter().map(|r| r.sample_size() as usize).sum());
    for r in records {
        write_record(&mut out, r)?;
    }
    Ok(out)
}
