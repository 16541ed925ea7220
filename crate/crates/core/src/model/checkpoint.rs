//! Binary model checkpoints.
//!
//! ```text
//! magic      8 bytes  "ALCKPT\0\0"
//! version    u32 LE   1
//! arch       u8       0 = softmax, 1 = mlp
//! feature_dim u32 LE
//! classes    u32 LE
//! hidden     u32 LE   0 for softmax
//! init_seed  u64 LE
//! params     f64 LE   each layer's weights (row-major, outputs x inputs)
//!                     then its bias, input layer first
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{Architecture, ModelError, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ALCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| ModelError::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32, ModelError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

impl ModelParams {
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<(), ModelError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let (tag, hidden) = match self.arch {
            Architecture::Softmax => (0u8, 0u32),
            Architecture::Mlp { hidden } => (1u8, hidden as u32),
        };
        w.write_all(&[tag])?;
        w.write_all(&(self.feature_dim as u32).to_le_bytes())?;
        w.write_all(&(self.num_classes as u32).to_le_bytes())?;
        w.write_all(&hidden.to_le_bytes())?;
        w.write_all(&self.init_seed.to_le_bytes())?;
        for v in self.params() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self, ModelError> {
        if &read_array::<8>(r)? != CHECKPOINT_MAGIC {
            return Err(ModelError::Checkpoint("not a model checkpoint".into()));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
        }
        let [tag] = read_array::<1>(r)?;
        let feature_dim = read_u32(r)? as usize;
        let num_classes = read_u32(r)? as usize;
        let hidden = read_u32(r)? as usize;
        let init_seed = u64::from_le_bytes(read_array(r)?);
        let arch = match tag {
            0 => Architecture::Softmax,
            1 => Architecture::Mlp { hidden },
            other => return Err(ModelError::Checkpoint(format!("unknown architecture tag {other}"))),
        };
        let mut model = ModelParams::init(arch, feature_dim, num_classes, init_seed)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        for layer in &mut model.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = f64::from_le_bytes(read_array(r)?);
            }
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(ModelError::Checkpoint("trailing bytes".into()));
        }
        if !model.is_finite() {
            return Err(ModelError::Checkpoint("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::read_checkpoint(&mut std::fs::read(path)?.as_slice())
    }
}
