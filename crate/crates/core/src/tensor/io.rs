//! Binary artifact format.
//!
//! ```text
//! b"TTG1"  u32 version  u32 n_cores
//! per core: u32 left, u32 site, u32 right, left*site*right × (f64 re, f64 im)
//! optional: u32 byte length + UTF-8 JSON metadata
//! ```
//!
//! All integers and floats are little-endian. Operator cores are written with
//! their fused local index; the split lives in the metadata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Core, TensorTrain};
use crate::{Error, Result, C64};

pub const MAGIC: &[u8; 4] = b"TTG1";
pub const VERSION: u32 = 1;

pub fn write_train<W: Write>(
    w: &mut W,
    train: &TensorTrain,
    metadata: Option<&serde_json::Value>,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_of(train.len())?.to_le_bytes())?;
    for core in train.cores() {
        let (l, s, r) = core.shape();
        for d in [l, s, r] {
            w.write_all(&u32_of(d)?.to_le_bytes())?;
        }
        for z in core.data() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    if let Some(meta) = metadata {
        let bytes = serde_json::to_vec(meta).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(&u32_of(bytes.len())?.to_le_bytes())?;
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_train<R: Read>(r: &mut R) -> Result<(TensorTrain, Option<serde_json::Value>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(r)? as usize;
    let mut cores = Vec::with_capacity(n);
    for _ in 0..n {
        let (left, site, right) = (read_u32(r)? as usize, read_u32(r)? as usize, read_u32(r)? as usize);
        let len = left
            .checked_mul(site)
            .and_then(|x| x.checked_mul(right))
            .ok_or_else(|| Error::Format("core size overflows".into()))?;
        let mut buf = vec![0u8; len * 16];
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated core data".into()))?;
        let data = buf
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        cores.push(Core::new(left, site, right, data).map_err(|e| Error::Format(e.to_string()))?);
    }
    let train = TensorTrain::new(cores).map_err(|e| Error::Format(e.to_string()))?;

    let mut len = [0u8; 4];
    let metadata = match r.read(&mut len)? {
        0 => None,
        k => {
            if k < 4 {
                r.read_exact(&mut len[k..]).map_err(|_| Error::Format("truncated trailer".into()))?;
            }
            let mut bytes = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated metadata".into()))?;
            Some(serde_json::from_slice(&bytes).map_err(|e| Error::Format(e.to_string()))?)
        }
    };
    Ok((train, metadata))
}

pub fn save(path: &Path, train: &TensorTrain, metadata: Option<&serde_json::Value>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_train(&mut w, train, metadata)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(TensorTrain, Option<serde_json::Value>)> {
    let mut r = BufReader::new(File::open(path)?);
    read_train(&mut r)
}

fn u32_of(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("{x} does not fit in u32")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated integer".into()))?;
    Ok(u32::from_le_bytes(b))
}
