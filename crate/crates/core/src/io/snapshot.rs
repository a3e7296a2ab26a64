//! Binary trajectory snapshots.
//!
//! Layout: 8-byte magic, `u32` version and `u64` header length (little
//! endian), a JSON header, then one block per saved time holding `t` and the
//! coefficients as little-endian `f64`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::basis::SpectralField;
use crate::error::{Error, Result};
use crate::integrate::{Trajectory, TrajectoryMeta};
use crate::real::Real;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"SGFSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n_modes: usize,
    n_times: usize,
    meta: TrajectoryMeta,
    sup_v: f64,
    sup_w: f64,
    dissipation: f64,
}

pub fn write_snapshot<T: Real, W: Write>(traj: &Trajectory<T>, mut w: W) -> Result<()> {
    let n_modes = traj.states.first().map_or(0, |s| s.len());
    let header = serde_json::to_vec(&Header {
        n_modes,
        n_times: traj.states.len(),
        meta: traj.meta.clone(),
        sup_v: traj.sup_v.f64(),
        sup_w: traj.sup_w.f64(),
        dissipation: traj.dissipation.f64(),
    })?;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        w.write_all(&t.f64().to_le_bytes())?;
        for c in &s.coeffs {
            w.write_all(&c.f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format(format!("truncated snapshot while reading {what}")))?;
    Ok(b)
}

pub fn read_snapshot<T: Real, R: Read>(mut r: R) -> Result<Trajectory<T>> {
    let magic: [u8; 8] = take(&mut r, "magic")?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a trajectory snapshot (bad magic bytes)".into()));
    }
    let version = u32::from_le_bytes(take(&mut r, "version")?);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: SNAPSHOT_VERSION,
        });
    }
    let len = u64::from_le_bytes(take(&mut r, "header length")?);
    if len > 1 << 24 {
        return Err(Error::Format(format!("implausible header length {len}")));
    }
    let mut raw = vec![0u8; len as usize];
    r.read_exact(&mut raw)
        .map_err(|_| Error::Format("truncated snapshot header".into()))?;
    let h: Header = serde_json::from_slice(&raw).map_err(|e| Error::Format(format!("corrupted header: {e}")))?;
    let mut times = Vec::with_capacity(h.n_times);
    let mut states = Vec::with_capacity(h.n_times);
    for _ in 0..h.n_times {
        times.push(T::of(f64::from_le_bytes(take(&mut r, "time")?)));
        let mut c = Vec::with_capacity(h.n_modes);
        for _ in 0..h.n_modes {
            c.push(T::of(f64::from_le_bytes(take(&mut r, "coefficient")?)));
        }
        states.push(SpectralField::from_vec(c));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last block".into()));
    }
    Ok(Trajectory {
        times,
        states,
        meta: h.meta,
        sup_v: T::of(h.sup_v),
        sup_w: T::of(h.sup_w),
        dissipation: T::of(h.dissipation),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory<f64> {
        Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![
                SpectralField::from_vec(vec![1.0, -0.0, f64::MIN_POSITIVE]),
                SpectralField::from_vec(vec![0.1 + 0.2, 1e300, -3.5]),
                SpectralField::from_vec(vec![f64::EPSILON, 2.0, 1.0 / 3.0]),
            ],
            meta: TrajectoryMeta {
                eps: 0.1,
                seed: 7,
                stream: 3,
                dt: 0.01,
                config_hash: "abc".into(),
                scheme: "euler_maruyama".into(),
            },
            sup_v: 1.5,
            sup_w: 2.5,
            dissipation: 0.25,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_snapshot(&t, &mut buf).unwrap();
        let back: Trajectory<f64> = read_snapshot(&buf[..]).unwrap();
        for (a, b) in t.states.iter().zip(&back.states) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(t, back);
    }

    #[test]
    fn corrupted_header_is_format_error() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        buf[21] = b'#';
        assert!(matches!(read_snapshot::<f64, _>(&buf[..]), Err(Error::Format(_))));
        buf[0] = b'X';
        assert!(matches!(read_snapshot::<f64, _>(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch_has_hint() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        buf[8..12].copy_from_slice(&2u32.to_le_bytes());
        let e = read_snapshot::<f64, _>(&buf[..]).unwrap_err();
        assert!(matches!(e, Error::Version { found: 2, expected: 1 }));
        assert!(e.to_string().contains("re-export"));
    }
}
