//! Binary dataset files.
//!
//! Layout (all little-endian):
//! `RISSKGDS` magic, u32 version, u64 M, u64 N, u64 n_train, u64 n_val, then the
//! parameter snapshot (c0, alpha, L, pt, sigma2, amp_ae, mx, my, d, lambda; counts
//! as u64, the rest f64), then N records of
//! x_a, x_b, y_a, y_b, y_r_a[M], y_r_b[M], w[M], g_ab as (re, im) f64 pairs.

use std::io::{Read, Write};

use super::{ChanError, Dataset, ProbeRound, Result, SystemParams};
use crate::C64;

const MAGIC: &[u8; 8] = b"RISSKGDS";
pub const FORMAT_VERSION: u32 = 1;

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_c<W: Write>(w: &mut W, z: C64) -> Result<()> {
    put_f64(w, z.re)?;
    put_f64(w, z.im)
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

fn get_c<R: Read>(r: &mut R) -> Result<C64> {
    Ok(C64::new(get_f64(r)?, get_f64(r)?))
}

fn get_usize<R: Read>(r: &mut R) -> Result<usize> {
    usize::try_from(get_u64(r)?).map_err(|_| ChanError::Format("count overflows usize".into()))
}

pub fn write_dataset<W: Write>(out: &mut W, ds: &Dataset) -> Result<()> {
    let p = &ds.params;
    let m = p.m();
    let (n_train, n_val, _) = ds.split_counts();
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [m, ds.len(), n_train, n_val] {
        put_u64(out, v as u64)?;
    }
    put_f64(out, p.c0)?;
    put_f64(out, p.alpha)?;
    put_u64(out, p.num_paths as u64)?;
    put_f64(out, p.pt)?;
    put_f64(out, p.sigma2)?;
    put_f64(out, p.amp_ae)?;
    put_u64(out, p.mx as u64)?;
    put_u64(out, p.my as u64)?;
    put_f64(out, p.elem_spacing)?;
    put_f64(out, p.wavelength)?;
    for r in &ds.rounds {
        for z in [r.x_a, r.x_b, r.y_a, r.y_b] {
            put_c(out, z)?;
        }
        for v in [&r.y_r_a, &r.y_r_b, &r.w] {
            for z in v.iter() {
                put_c(out, *z)?;
            }
        }
        put_c(out, r.g_ab)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(input: &mut R) -> Result<Dataset> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ChanError::Format("bad magic".into()));
    }
    let mut vb = [0u8; 4];
    input.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != FORMAT_VERSION {
        return Err(ChanError::Format(format!("unsupported version {version}")));
    }
    let m = get_usize(input)?;
    let n = get_usize(input)?;
    let n_train = get_usize(input)?;
    let n_val = get_usize(input)?;
    let params = SystemParams {
        c0: get_f64(input)?,
        alpha: get_f64(input)?,
        num_paths: get_usize(input)?,
        pt: get_f64(input)?,
        sigma2: get_f64(input)?,
        amp_ae: get_f64(input)?,
        mx: get_usize(input)?,
        my: get_usize(input)?,
        elem_spacing: get_f64(input)?,
        wavelength: get_f64(input)?,
    };
    if params.m() != m {
        return Err(ChanError::Format(format!("header M={m} but array is {}x{}", params.mx, params.my)));
    }
    let read_vec = |r: &mut R| -> Result<Vec<C64>> { (0..m).map(|_| get_c(r)).collect() };
    let mut rounds = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let x_a = get_c(input)?;
        let x_b = get_c(input)?;
        let y_a = get_c(input)?;
        let y_b = get_c(input)?;
        let y_r_a = read_vec(input)?;
        let y_r_b = read_vec(input)?;
        let w = read_vec(input)?;
        let g_ab = get_c(input)?;
        rounds.push(ProbeRound { x_a, x_b, y_a, y_b, y_r_a, y_r_b, w, g_ab });
    }
    Dataset::new(params, rounds, n_train, n_val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chansim::{generate_dataset, DatasetConfig};

    #[test]
    fn round_trip_is_exact() {
        let p = SystemParams::desk().with_array(3, 2);
        let ds = generate_dataset(&p, &DatasetConfig::uniform(17, (1.0, 25.0)), 4).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let m = 6usize;
        assert_eq!(buf.len(), 8 + 4 + 32 + 80 + 17 * 16 * (4 + 3 * m + 1));
        let back = read_dataset(&mut buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_dataset(&mut &b"NOTADATASET........"[..]).is_err());
        let p = SystemParams::desk().with_array(1, 1);
        let ds = generate_dataset(&p, &DatasetConfig::uniform(2, (1.0, 2.0)), 4).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_dataset(&mut buf.as_slice()).is_err());
    }
}
