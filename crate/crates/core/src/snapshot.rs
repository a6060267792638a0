//! Binary snapshot files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic      4 bytes  "RSNP"
//! version    u32      1
//! kind       u32      0 = fields, 1 = moments
//! time       f64      seconds
//! seed       u64      master seed
//! dims       u32
//! per axis   u64 points, f64 extent (m)
//! n_traj     u64      records that follow
//! flagged    u64      flagged trajectories (not stored for moments)
//! [moments]  u64      basis size K
//! records:
//!   fields:  u64 seed, u32 flagged, 2·M × (f64 re, f64 im)
//!   moments: u64 seed, 2 × f64 norm, (f64, f64) overlap, 2·K × (f64, f64)
//! ```
//!
//! Field snapshots restore the fields but not the noise streams, so a
//! reloaded ensemble is meant for analysis rather than further evolution.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::observables::{ProjectedSnapshot, TrajectoryMoments};
use crate::twa::{Trajectory, TrajectoryEnsemble};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"RSNP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Fields = 0,
    Moments = 1,
}

struct Header {
    kind: SnapshotKind,
    time: f64,
    seed: u64,
    grid: Grid,
    n_traj: usize,
    flagged: usize,
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u32::<LE>(h.kind as u32)?;
    w.write_f64::<LE>(h.time)?;
    w.write_u64::<LE>(h.seed)?;
    w.write_u32::<LE>(h.grid.dims() as u32)?;
    for (n, l) in h.grid.points().iter().zip(h.grid.extents()) {
        w.write_u64::<LE>(*n as u64)?;
        w.write_f64::<LE>(*l)?;
    }
    w.write_u64::<LE>(h.n_traj as u64)?;
    w.write_u64::<LE>(h.flagged as u64)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a snapshot file".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match r.read_u32::<LE>()? {
        0 => SnapshotKind::Fields,
        1 => SnapshotKind::Moments,
        k => return Err(Error::Format(format!("unknown kind {k}"))),
    };
    let time = r.read_f64::<LE>()?;
    let seed = r.read_u64::<LE>()?;
    let dims = r.read_u32::<LE>()? as usize;
    if !(1..=3).contains(&dims) {
        return Err(Error::Format(format!("{dims} grid axes")));
    }
    let mut points = Vec::with_capacity(dims);
    let mut extents = Vec::with_capacity(dims);
    for _ in 0..dims {
        points.push(r.read_u64::<LE>()? as usize);
        extents.push(r.read_f64::<LE>()?);
    }
    let grid = Grid::new(&points, &extents).map_err(|e| Error::Format(e.to_string()))?;
    let n_traj = r.read_u64::<LE>()? as usize;
    let flagged = r.read_u64::<LE>()? as usize;
    Ok(Header {
        kind,
        time,
        seed,
        grid,
        n_traj,
        flagged,
    })
}

fn write_complex<W: Write>(w: &mut W, z: Complex64) -> Result<()> {
    w.write_f64::<LE>(z.re)?;
    w.write_f64::<LE>(z.im)?;
    Ok(())
}

fn read_complex<R: Read>(r: &mut R) -> Result<Complex64> {
    Ok(Complex64::new(r.read_f64::<LE>()?, r.read_f64::<LE>()?))
}

fn expect_kind(h: &Header, kind: SnapshotKind) -> Result<()> {
    if h.kind != kind {
        return Err(Error::Format(format!("expected {kind:?} snapshot, found {:?}", h.kind)));
    }
    Ok(())
}

/// Full fields of every trajectory, flagged ones included.
pub fn write_fields<W: Write>(w: &mut W, ens: &TrajectoryEnsemble) -> Result<()> {
    write_header(
        w,
        &Header {
            kind: SnapshotKind::Fields,
            time: ens.time,
            seed: ens.master_seed,
            grid: ens.grid().clone(),
            n_traj: ens.n_traj(),
            flagged: ens.flagged(),
        },
    )?;
    for t in &ens.trajectories {
        w.write_u64::<LE>(t.seed)?;
        w.write_u32::<LE>(t.flagged as u32)?;
        for z in t.psi.iter().flatten() {
            write_complex(w, *z)?;
        }
    }
    Ok(())
}

pub fn read_fields<R: Read>(r: &mut R) -> Result<TrajectoryEnsemble> {
    let h = read_header(r)?;
    expect_kind(&h, SnapshotKind::Fields)?;
    let m = h.grid.size();
    let mut trajectories = Vec::with_capacity(h.n_traj);
    for _ in 0..h.n_traj {
        let seed = r.read_u64::<LE>()?;
        let flagged = r.read_u32::<LE>()? != 0;
        let mut psi: [Vec<Complex64>; 2] = [Vec::with_capacity(m), Vec::with_capacity(m)];
        for p in &mut psi {
            for _ in 0..m {
                p.push(read_complex(r)?);
            }
        }
        let mut t = Trajectory::new(seed, psi);
        t.flagged = flagged;
        trajectories.push(t);
    }
    let mut ens = TrajectoryEnsemble::new(h.grid, h.seed, trajectories);
    ens.time = h.time;
    Ok(ens)
}

/// Per-trajectory moments; `grid` and `seed` describe the run they came from.
pub fn write_moments<W: Write>(w: &mut W, snap: &ProjectedSnapshot, grid: &Grid, seed: u64) -> Result<()> {
    if grid.size() != snap.modes {
        return Err(Error::Format("grid does not match the snapshot".into()));
    }
    write_header(
        w,
        &Header {
            kind: SnapshotKind::Moments,
            time: snap.time,
            seed,
            grid: grid.clone(),
            n_traj: snap.n_traj(),
            flagged: snap.flagged,
        },
    )?;
    let k = snap.basis_size();
    w.write_u64::<LE>(k as u64)?;
    for t in &snap.trajectories {
        if t.coeffs.iter().any(|c| c.len() != k) {
            return Err(Error::Format("ragged basis coefficients".into()));
        }
        w.write_u64::<LE>(t.seed)?;
        w.write_f64::<LE>(t.norms[0])?;
        w.write_f64::<LE>(t.norms[1])?;
        write_complex(w, t.overlap)?;
        for z in t.coeffs.iter().flatten() {
            write_complex(w, *z)?;
        }
    }
    Ok(())
}

pub fn read_moments<R: Read>(r: &mut R) -> Result<(ProjectedSnapshot, Grid, u64)> {
    let h = read_header(r)?;
    expect_kind(&h, SnapshotKind::Moments)?;
    let k = r.read_u64::<LE>()? as usize;
    let mut trajectories = Vec::with_capacity(h.n_traj);
    for _ in 0..h.n_traj {
        let seed = r.read_u64::<LE>()?;
        let norms = [r.read_f64::<LE>()?, r.read_f64::<LE>()?];
        let overlap = read_complex(r)?;
        let mut coeffs: [Vec<Complex64>; 2] = [Vec::with_capacity(k), Vec::with_capacity(k)];
        for c in &mut coeffs {
            for _ in 0..k {
                c.push(read_complex(r)?);
            }
        }
        trajectories.push(TrajectoryMoments {
            seed,
            norms,
            overlap,
            coeffs,
        });
    }
    let snap = ProjectedSnapshot {
        time: h.time,
        modes: h.grid.size(),
        flagged: h.flagged,
        trajectories,
    };
    Ok((snap, h.grid, h.seed))
}
