//! Little-endian binary checkpoints of the latest snapshot:
//! `ndims: u32, dims: [u64; ndims], h: f64, dt: f64, time_index: u64,
//! nfields: u32, payload: [f64]`, fields stored one after another as
//! `u_0, ∂_t u_0, u_1, ∂_t u_1, ...`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::{GridSolution, Scheme};

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub dims: Vec<usize>,
    pub h: f64,
    pub dt: f64,
    pub time_index: usize,
    pub fields: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn time(&self) -> f64 {
        self.time_index as f64 * self.dt
    }
}

/// Writes the last stored snapshot of `sol`.
pub fn write_checkpoint(sol: &GridSolution, path: &Path) -> Result<Checkpoint> {
    let snap = sol
        .snapshots
        .last()
        .ok_or_else(|| Error::Data("solution has no stored snapshot".into()))?;
    let dims = match sol.scheme {
        Scheme::Radial => vec![sol.points],
        Scheme::Cartesian => vec![sol.points; 3],
    };
    let mid = snap.levels.len() / 2;
    let mut fields = Vec::with_capacity(2 * sol.unknowns);
    for i in 0..sol.unknowns {
        let (before, after) = (&snap.levels[mid - 1][i], &snap.levels[mid + 1][i]);
        fields.push(snap.levels[mid][i].clone());
        fields.push(after.iter().zip(before).map(|(a, b)| (a - b) / (2.0 * sol.dt)).collect());
    }
    let ck = Checkpoint { dims, h: sol.h, dt: sol.dt, time_index: snap.time_index, fields };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<LittleEndian>(ck.dims.len() as u32)?;
    for &d in &ck.dims {
        w.write_u64::<LittleEndian>(d as u64)?;
    }
    w.write_f64::<LittleEndian>(ck.h)?;
    w.write_f64::<LittleEndian>(ck.dt)?;
    w.write_u64::<LittleEndian>(ck.time_index as u64)?;
    w.write_u32::<LittleEndian>(ck.fields.len() as u32)?;
    for f in &ck.fields {
        for &v in f {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(ck)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |msg: &str| Error::Parse(format!("checkpoint {}: {msg}", path.display()));
    let ndims = r.read_u32::<LittleEndian>()? as usize;
    if !(1..=3).contains(&ndims) {
        return Err(bad("dimension count must be 1 to 3"));
    }
    let dims = (0..ndims)
        .map(|_| r.read_u64::<LittleEndian>().map(|d| d as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let h = r.read_f64::<LittleEndian>()?;
    let dt = r.read_f64::<LittleEndian>()?;
    let time_index = r.read_u64::<LittleEndian>()? as usize;
    let nfields = r.read_u32::<LittleEndian>()? as usize;
    let cells: usize = dims.iter().product();
    let mut fields = Vec::with_capacity(nfields);
    for _ in 0..nfields {
        let mut f = vec![0.0; cells];
        r.read_f64_into::<LittleEndian>(&mut f).map_err(|_| bad("payload shorter than header declares"))?;
        fields.push(f);
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    Ok(Checkpoint { dims, h, dt, time_index, fields })
}

#[cfg(test)]
mod tests {
    use super::super::{evolve, EvolveOptions, WaveSystem};
    use super::*;
    use crate::linsolve::{CauchyData, RadialData, RadialProfile};

    #[test]
    fn checkpoint_round_trip() {
        let data = CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero()));
        let sol = evolve(&WaveSystem::free(1, 1.0).unwrap(), &data, &EvolveOptions { t_final: 2.0, h: 0.1, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.bin");
        let written = write_checkpoint(&sol, &path).unwrap();
        let read = read_checkpoint(&path).unwrap();
        assert_eq!(written, read);
        assert_eq!(read.fields.len(), 2);
        assert!((read.time() - 2.0).abs() < 1e-12);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
