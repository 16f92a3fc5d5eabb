//! Shared pieces of the little-endian binary formats.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatIssue {
    BadMagic { expected: [u8; 4] },
    UnsupportedVersion(u16),
    Truncated { needed: usize },
    Invalid(String),
    TrailingBytes,
}

impl std::fmt::Display for FormatIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatIssue::BadMagic { expected } => {
                write!(f, "bad magic, expected {}", String::from_utf8_lossy(expected))
            }
            FormatIssue::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            FormatIssue::Truncated { needed } => write!(f, "truncated, needed {needed} more bytes"),
            FormatIssue::Invalid(msg) => f.write_str(msg),
            FormatIssue::TrailingBytes => f.write_str("trailing bytes after last record"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("format error at byte {offset}: {issue}")]
pub struct FormatError {
    pub offset: u64,
    pub issue: FormatIssue,
}

impl FormatError {
    pub fn new(offset: usize, issue: FormatIssue) -> Self {
        Self {
            offset: offset as u64,
            issue,
        }
    }

    pub fn invalid(offset: usize, msg: impl Into<String>) -> Self {
        Self::new(offset, FormatIssue::Invalid(msg.into()))
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(FormatError::new(
                self.pos,
                FormatIssue::Truncated { needed: n - remaining },
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let start = self.pos;
        if self.take(4).ok() != Some(&expected[..]) {
            return Err(FormatError::new(start, FormatIssue::BadMagic { expected: *expected }));
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u16) -> Result<(), FormatError> {
        let start = self.pos;
        let v = self.u16()?;
        if v != supported {
            return Err(FormatError::new(start, FormatIssue::UnsupportedVersion(v)));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, FormatError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| FormatError::invalid(self.pos, "payload size overflows"))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.bytes.len() {
            return Err(FormatError::new(self.pos, FormatIssue::TrailingBytes));
        }
        Ok(())
    }
}
