//! Binary snapshot files.
//!
//! Particle snapshot (`MNSP`): magic, `u16` version, `u64` N, `u64` d, `f64` t, then X and V
//! as row-major `N × d` arrays of `f64`. Field snapshot (`MNSF`): magic, `u16` version,
//! `u64` M, `u64` d, `f64` L, `f64` t, then ρ followed by each velocity component, each an
//! `M^d` array of `f64`. All integers and floats little-endian.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::particles::ParticleState;
use crate::spde::FieldState;

pub const PARTICLE_MAGIC: &[u8; 4] = b"MNSP";
pub const FIELD_MAGIC: &[u8; 4] = b"MNSF";
pub const VERSION: u16 = 1;

fn put_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn expect_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic {:?}, expected {:?}", m, magic)));
    }
    let version = get_u16(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

pub fn write_particles<W: Write>(w: &mut W, s: &ParticleState) -> Result<()> {
    w.write_all(PARTICLE_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(s.n() as u64).to_le_bytes())?;
    w.write_all(&(s.d as u64).to_le_bytes())?;
    w.write_all(&s.t.to_le_bytes())?;
    put_f64s(w, &s.x)?;
    put_f64s(w, &s.v)
}

pub fn read_particles<R: Read>(r: &mut R) -> Result<ParticleState> {
    expect_header(r, PARTICLE_MAGIC)?;
    let n = get_u64(r)? as usize;
    let d = get_u64(r)? as usize;
    if !(1..=3).contains(&d) {
        return Err(Error::Format(format!("dimension {d}")));
    }
    let t = get_f64(r)?;
    let x = get_f64s(r, n * d)?;
    let v = get_f64s(r, n * d)?;
    ParticleState::new(d, x, v, t)
}

pub fn write_field<W: Write>(w: &mut W, f: &FieldState) -> Result<()> {
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(f.grid.m as u64).to_le_bytes())?;
    w.write_all(&(f.grid.d as u64).to_le_bytes())?;
    w.write_all(&f.grid.length.to_le_bytes())?;
    w.write_all(&f.t.to_le_bytes())?;
    put_f64s(w, &f.rho)?;
    for c in &f.vel {
        put_f64s(w, c)?;
    }
    Ok(())
}

pub fn read_field<R: Read>(r: &mut R) -> Result<FieldState> {
    expect_header(r, FIELD_MAGIC)?;
    let m = get_u64(r)? as usize;
    let d = get_u64(r)? as usize;
    if !(1..=3).contains(&d) || m == 0 {
        return Err(Error::Format(format!("grid {m}^{d}")));
    }
    let length = get_f64(r)?;
    let t = get_f64(r)?;
    let grid = Grid::new(d, m, length);
    let rho = get_f64s(r, grid.len())?;
    let vel = (0..d).map(|_| get_f64s(r, grid.len())).collect::<Result<Vec<_>>>()?;
    FieldState::new(grid, rho, vel, t)
}
