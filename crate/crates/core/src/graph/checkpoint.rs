//! Parameter files: `MGBPCKPT`, a SHA-256 digest of the configuration JSON,
//! then `(u32 key length, key bytes, MGBT tensor)` entries until end of file.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{MgbpConfig, NetworkGraph};
use crate::error::{Error, Result};
use crate::tensor::io::{read_tensor, write_tensor, DType};
use crate::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MGBPCKPT";

pub fn config_digest(config: &MgbpConfig) -> [u8; 32] {
    Sha256::digest(config.to_json().as_bytes()).into()
}

pub fn write_params<W: Write>(w: &mut W, digest: &[u8; 32], params: &ParamStore) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(digest)?;
    for (key, t) in params {
        let len = u32::try_from(key.len()).map_err(|_| Error::Format(format!("key `{key}` too long")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(key.as_bytes())?;
        write_tensor(w, t, DType::F64)?;
    }
    Ok(())
}

/// Reads a parameter file, returning the stored digest and parameters.
pub fn read_params<R: Read>(r: &mut R) -> Result<([u8; 32], ParamStore)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an MGBPCKPT file".into()));
    }
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    let mut params = ParamStore::new();
    loop {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let mut key = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut key)?;
        let key = String::from_utf8(key).map_err(|_| Error::Format("parameter key is not UTF-8".into()))?;
        let t = read_tensor(r)?;
        if params.insert(key.clone(), t).is_some() {
            return Err(Error::Format(format!("duplicate parameter `{key}`")));
        }
    }
    Ok((digest, params))
}

impl NetworkGraph {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_params(&mut w, &config_digest(self.config()), self.params())?;
        w.flush()?;
        Ok(())
    }

    /// Builds the topology for `config` and loads parameters saved for that
    /// exact configuration.
    pub fn load(config: MgbpConfig, path: impl AsRef<Path>) -> Result<Self> {
        let (digest, params) = read_params(&mut BufReader::new(File::open(path)?))?;
        if digest != config_digest(&config) {
            return Err(Error::Format("checkpoint was written for a different configuration".into()));
        }
        let mut g = NetworkGraph::dry_run(config)?;
        g.set_params(params)?;
        Ok(g)
    }
}
