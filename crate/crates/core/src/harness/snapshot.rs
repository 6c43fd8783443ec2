//! `GFZF1` field snapshots: one UTF-8 header line
//! `GFZF1 <axes> <dims...> <extents...> <time> <model>` followed by the
//! field values as little-endian `f64`, row-major.

use std::path::Path;

use crate::error::HarnessError;
use crate::spectral::{make_grid, Field};

pub const SNAPSHOT_TAG: &str = "GFZF1";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub dims: Vec<usize>,
    pub extents: Vec<f64>,
    pub time: f64,
    pub model: String,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(field: &Field, time: f64, model: &str) -> Self {
        Self {
            dims: field.grid().dims().to_vec(),
            extents: field.grid().extents().to_vec(),
            time,
            model: model.to_string(),
            values: field.values().to_vec(),
        }
    }

    pub fn to_field(&self) -> Result<Field, HarnessError> {
        let grid = make_grid(&self.dims, &self.extents)?;
        Ok(Field::new(grid, self.values.clone())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{SNAPSHOT_TAG} {}", self.dims.len());
        for d in &self.dims {
            header.push_str(&format!(" {d}"));
        }
        for e in &self.extents {
            header.push_str(&format!(" {e:?}"));
        }
        header.push_str(&format!(" {:?} {}\n", self.time, self.model));
        let mut out = header.into_bytes();
        out.reserve(8 * self.values.len());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        let err = |m: String| HarnessError::Snapshot(m);
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("missing header line".into()))?;
        let header =
            std::str::from_utf8(&bytes[..nl]).map_err(|_| err("header is not UTF-8".into()))?;
        let mut tok = header.split(' ');
        let tag = tok.next().unwrap_or("");
        if tag != SNAPSHOT_TAG {
            return Err(err(format!("expected tag {SNAPSHOT_TAG}, found `{tag}`")));
        }
        let mut next = |what: &str| {
            tok.next()
                .ok_or_else(|| err(format!("header ends before {what}")))
        };
        let axes: usize = next("axis count")?
            .parse()
            .map_err(|_| err("bad axis count".into()))?;
        if !(1..=3).contains(&axes) {
            return Err(err(format!("axis count {axes} outside 1..=3")));
        }
        let dims = (0..axes)
            .map(|_| {
                next("dims")?
                    .parse::<usize>()
                    .map_err(|_| err("bad dim".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let extents = (0..axes)
            .map(|_| {
                next("extents")?
                    .parse::<f64>()
                    .map_err(|_| err("bad extent".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let time: f64 = next("time")?.parse().map_err(|_| err("bad time".into()))?;
        let model = next("model")?.to_string();
        let payload = &bytes[nl + 1..];
        let expected = dims.iter().product::<usize>() * 8;
        if payload.len() != expected {
            return Err(err(format!(
                "payload has {} bytes, dims {dims:?} require {expected}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            dims,
            extents,
            time,
            model,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
