//! Binary container for primitive sets with a YAML metadata sidecar.
//!
//! Layout (little endian): magic `IDBP`, format version u16, model code u16,
//! state dim u32, control dim u32, count u64, then per primitive the step
//! count u32, origin u8, cost f64, the states and the controls.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;

use super::{MotionPrimitive, Origin, PrimitiveSet, SetMeta};
use crate::dynamics::{Control, ModelId, ModelSpec, State};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"IDBP";

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.yaml");
    PathBuf::from(s)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::PrimitiveFile(msg.into())
}

pub fn save_set(set: &PrimitiveSet, path: &Path) -> Result<()> {
    let m = set.model();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u16::<LittleEndian>(m.id.code())?;
    w.write_u32::<LittleEndian>(m.state_dim as u32)?;
    w.write_u32::<LittleEndian>(m.control_dim as u32)?;
    w.write_u64::<LittleEndian>(set.len() as u64)?;
    for p in set.iter() {
        w.write_u32::<LittleEndian>(p.us.len() as u32)?;
        w.write_u8(match p.origin {
            Origin::Offline => 0,
            Origin::Online => 1,
        })?;
        w.write_f64::<LittleEndian>(p.cost)?;
        for v in p.xs.iter().chain(&p.us) {
            for e in v.iter() {
                w.write_f64::<LittleEndian>(*e)?;
            }
        }
    }
    w.flush()?;
    let meta = serde_yaml::to_string(&set.meta).map_err(|e| corrupt(e.to_string()))?;
    std::fs::write(meta_path(path), meta)?;
    Ok(())
}

fn read_vec(r: &mut impl Read, n: usize) -> Result<nalgebra::DVector<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut v)
        .map_err(|_| corrupt("truncated primitive data"))?;
    Ok(nalgebra::DVector::from_vec(v))
}

/// Loads a set written by [`save_set`], refusing files written for another
/// model or format version.
pub fn load_set(path: &Path, model: &ModelSpec) -> Result<PrimitiveSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("file too short"))?;
    if &magic != MAGIC {
        return Err(corrupt(format!("{} is not a primitive file", path.display())));
    }
    let header = |e: std::io::Error| corrupt(format!("bad header: {e}"));
    let version = r.read_u16::<LittleEndian>().map_err(header)?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let code = r.read_u16::<LittleEndian>().map_err(header)?;
    let found = ModelId::from_code(code).ok_or_else(|| corrupt(format!("unknown model code {code}")))?;
    if found != model.id {
        return Err(Error::ModelMismatch {
            found: found.name().into(),
            expected: model.id.name().into(),
        });
    }
    let nx = r.read_u32::<LittleEndian>().map_err(header)? as usize;
    let nu = r.read_u32::<LittleEndian>().map_err(header)? as usize;
    if nx != model.state_dim || nu != model.control_dim {
        return Err(corrupt(format!(
            "dimensions ({nx}, {nu}) do not match the model ({}, {})",
            model.state_dim, model.control_dim
        )));
    }
    let count = r.read_u64::<LittleEndian>().map_err(header)?;
    let mut prims = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let steps = r.read_u32::<LittleEndian>().map_err(|_| corrupt("truncated primitive header"))? as usize;
        let origin = match r.read_u8().map_err(|_| corrupt("truncated primitive header"))? {
            0 => Origin::Offline,
            1 => Origin::Online,
            o => return Err(corrupt(format!("unknown origin tag {o}"))),
        };
        let cost = r.read_f64::<LittleEndian>().map_err(|_| corrupt("truncated primitive header"))?;
        let xs: Vec<State> = (0..=steps).map(|_| read_vec(&mut r, nx)).collect::<Result<_>>()?;
        let us: Vec<Control> = (0..steps).map(|_| read_vec(&mut r, nu)).collect::<Result<_>>()?;
        prims.push(MotionPrimitive { xs, us, cost, origin });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", rest.len())));
    }
    let mp = meta_path(path);
    let meta = if mp.exists() {
        let text = std::fs::read_to_string(&mp)?;
        let meta: SetMeta =
            serde_yaml::from_str(&text).map_err(|e| Error::parse_yaml(&mp.display().to_string(), e))?;
        if meta.model != model.id.name() {
            return Err(Error::ModelMismatch {
                found: meta.model,
                expected: model.id.name().into(),
            });
        }
        meta
    } else {
        SetMeta::new(model.id)
    };
    Ok(PrimitiveSet::new(model, prims, meta))
}

#[derive(Serialize)]
struct PrimitiveDoc {
    cost: f64,
    origin: Origin,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SetDoc<'a> {
    meta: &'a SetMeta,
    primitives: Vec<PrimitiveDoc>,
}

/// Human-readable dump of a set.
pub fn export_yaml(set: &PrimitiveSet) -> Result<String> {
    let doc = SetDoc {
        meta: &set.meta,
        primitives: set
            .iter()
            .map(|p| PrimitiveDoc {
                cost: p.cost,
                origin: p.origin,
                states: p.xs.iter().map(|x| x.iter().copied().collect()).collect(),
                actions: p.us.iter().map(|u| u.iter().copied().collect()).collect(),
            })
            .collect(),
    };
    serde_yaml::to_string(&doc).map_err(|e| corrupt(e.to_string()))
}
