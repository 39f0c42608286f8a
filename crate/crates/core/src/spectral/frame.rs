//! Field persistence: a JSON object and a packed little-endian frame.
//!
//! Frame layout: `b"KDVF"`, `u32` version, `u32` m_max, then `2·m_max`
//! `f64` values ordered `û_1, û_{-1}, û_2, û_{-2}, …`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Field, SpectralError};

pub const FRAME_MAGIC: [u8; 4] = *b"KDVF";
pub const FRAME_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("bad frame magic {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported frame version {0}")]
    Version(u32),
    #[error("frame declares m_max = 0")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid field: {0}")]
    Invalid(#[from] SpectralError),
    #[error("m_max {declared} does not match {actual} coefficient pairs")]
    Length { declared: usize, actual: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldJson {
    m_max: usize,
    coeffs: Vec<[f64; 2]>,
}

impl Field {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FieldJson {
            m_max: self.m_max(),
            coeffs: self.pairs().to_vec(),
        })
        .expect("field serialises")
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json_str(s: &str) -> Result<Self, FrameError> {
        let j: FieldJson = serde_json::from_str(s)?;
        if j.m_max != j.coeffs.len() {
            return Err(FrameError::Length {
                declared: j.m_max,
                actual: j.coeffs.len(),
            });
        }
        Ok(Field::from_pairs(j.coeffs)?)
    }

    pub fn frame_len(m_max: usize) -> usize {
        12 + 16 * m_max
    }

    pub fn to_frame(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::frame_len(self.m_max()));
        self.write_frame(&mut out).expect("writing to a Vec");
        out
    }

    pub fn write_frame<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&FRAME_MAGIC)?;
        w.write_all(&FRAME_VERSION.to_le_bytes())?;
        w.write_all(&(self.m_max() as u32).to_le_bytes())?;
        for p in self.pairs() {
            w.write_all(&p[0].to_le_bytes())?;
            w.write_all(&p[1].to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_frame<R: Read>(r: &mut R) -> Result<Self, FrameError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != FRAME_MAGIC {
            return Err(FrameError::Magic(magic));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != FRAME_VERSION {
            return Err(FrameError::Version(version));
        }
        r.read_exact(&mut word)?;
        let m = u32::from_le_bytes(word) as usize;
        if m == 0 {
            return Err(FrameError::Empty);
        }
        let mut bytes = vec![0u8; 16 * m];
        r.read_exact(&mut bytes)?;
        let coeffs = bytes
            .chunks_exact(16)
            .map(|c| {
                [
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                ]
            })
            .collect();
        Ok(Field::from_pairs(coeffs)?)
    }

    pub fn from_frame(bytes: &[u8]) -> Result<Self, FrameError> {
        Self::read_frame(&mut &bytes[..])
    }
}
