use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::model::{RefinerConfig, RefinerModel, IN_CHANNELS};
use crate::{RefinerError, Result};

/// Model checkpoint layout (all little-endian):
/// magic `RFNC`, u32 format version, six u32 encoder channel widths,
/// u32 SE reduction, u32 input channels, u64 parameter count, then every
/// parameter as IEEE-754 f32 in the model's canonical slot order
/// (encoder blocks 1..6 as `[conv_a w, conv_a b, conv_b w, conv_b b]`,
/// projection w/b, SE fc1 w/b, fc2 w/b, decoder blocks 5..1 likewise,
/// residual head w/b).
const MAGIC: &[u8; 4] = b"RFNC";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &RefinerModel<f32>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for c in model.config().channels {
        out.write_all(&(c as u32).to_le_bytes())?;
    }
    out.write_all(&(model.config().se_reduction as u32).to_le_bytes())?;
    out.write_all(&(IN_CHANNELS as u32).to_le_bytes())?;
    out.write_all(&(model.param_count() as u64).to_le_bytes())?;
    for slot in model.params() {
        for v in slot {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path, cfg: &RefinerConfig) -> Result<RefinerModel<f32>> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let corrupt = |msg: &str| RefinerError::Checkpoint(format!("{}: {msg}", path.display()));

    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|_| corrupt("truncated header"))?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |input: &mut dyn Read| -> Result<u32> {
        input
            .read_exact(&mut u32buf)
            .map_err(|_| corrupt("truncated header"))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(RefinerError::ConfigMismatch(format!(
            "checkpoint format version {version}, expected {VERSION}"
        )));
    }
    let mut channels = [0usize; 6];
    for c in &mut channels {
        *c = read_u32(&mut input)? as usize;
    }
    let se_reduction = read_u32(&mut input)? as usize;
    let in_channels = read_u32(&mut input)? as usize;
    if channels != cfg.channels || se_reduction != cfg.se_reduction || in_channels != IN_CHANNELS {
        return Err(RefinerError::ConfigMismatch(format!(
            "checkpoint topology {channels:?}/r{se_reduction} does not match configured {:?}/r{}",
            cfg.channels, cfg.se_reduction
        )));
    }
    let mut u64buf = [0u8; 8];
    input
        .read_exact(&mut u64buf)
        .map_err(|_| corrupt("truncated header"))?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let mut model = RefinerModel::<f32>::new(cfg)?;
    if model.param_count() != count {
        return Err(RefinerError::ConfigMismatch(format!(
            "checkpoint holds {count} parameters, model needs {}",
            model.param_count()
        )));
    }
    let mut f32buf = [0u8; 4];
    for slot in model.params_mut() {
        for v in slot.iter_mut() {
            input
                .read_exact(&mut f32buf)
                .map_err(|_| corrupt("truncated payload"))?;
            *v = f32::from_le_bytes(f32buf);
        }
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_parameter_bit() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RefinerConfig {
            seed: 11,
            ..RefinerConfig::tiny()
        };
        let model = RefinerModel::<f32>::new(&cfg).unwrap();
        let path = dir.path().join("m.rfnc");
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path, &cfg).unwrap();
        for (a, b) in model.params().iter().zip(back.params()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn mismatched_config_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RefinerConfig::tiny();
        let model = RefinerModel::<f32>::new(&cfg).unwrap();
        let path = dir.path().join("m.rfnc");
        save_checkpoint(&model, &path).unwrap();
        let other = RefinerConfig::desk();
        assert!(matches!(
            load_checkpoint(&path, &other),
            Err(RefinerError::ConfigMismatch(_))
        ));
    }

    #[test]
    fn bad_magic_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.rfnc");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(
            load_checkpoint(&path, &RefinerConfig::tiny()),
            Err(RefinerError::Checkpoint(_))
        ));
    }
}
