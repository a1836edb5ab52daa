//! Binary distribution snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset size  field
//! 0      4     magic "LDPD"
//! 4      1     version (1)
//! 5      3     reserved (zero)
//! 8      8     u64  n               (sum length)
//! 16     8     u64  k               (state count)
//! 24     8     f64  merge_eps
//! 32     8     f64  width_cap
//! 40     8*k   u64  clusters in state 0..k
//! then, per state in order, per cluster in position order:
//!        8     f64  lo
//!        8     f64  hi
//!        8     f64  mass_lo
//!        8     f64  mass_hi
//! ```
//!
//! The format stores exactly the certified content of a `SumDistribution`;
//! writing and re-reading is lossless, so snapshots can key resumable
//! schedules by content.

use ldp_core::deviations::{Cluster, SumDistribution};
use ldp_core::Iv;

use crate::CliError;

pub const MAGIC: &[u8; 4] = b"LDPD";
pub const VERSION: u8 = 1;

pub fn write(dist: &SumDistribution) -> Vec<u8> {
    let k = dist.per_state.len();
    let mut out = Vec::with_capacity(40 + 8 * k + 32 * dist.cluster_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&[0u8; 3]);
    out.extend_from_slice(&(dist.n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    out.extend_from_slice(&dist.merge_eps.to_le_bytes());
    out.extend_from_slice(&dist.width_cap.to_le_bytes());
    for clusters in &dist.per_state {
        out.extend_from_slice(&(clusters.len() as u64).to_le_bytes());
    }
    for clusters in &dist.per_state {
        for c in clusters {
            out.extend_from_slice(&c.lo.to_le_bytes());
            out.extend_from_slice(&c.hi.to_le_bytes());
            out.extend_from_slice(&c.mass.lo.to_le_bytes());
            out.extend_from_slice(&c.mass.hi.to_le_bytes());
        }
    }
    out
}

pub fn read(bytes: &[u8]) -> Result<SumDistribution, CliError> {
    let take = |offset: usize, len: usize| -> Result<&[u8], CliError> {
        bytes
            .get(offset..offset + len)
            .ok_or_else(|| CliError::msg("snapshot truncated".into()))
    };
    let u64_at = |offset: usize| -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(take(offset, 8)?.try_into().unwrap()))
    };
    let f64_at = |offset: usize| -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(take(offset, 8)?.try_into().unwrap()))
    };

    if take(0, 4)? != MAGIC {
        return Err(CliError::msg("snapshot magic is not \"LDPD\"".into()));
    }
    let version = take(4, 1)?[0];
    if version != VERSION {
        return Err(CliError::msg(format!(
            "snapshot version {version} (this tool reads version {VERSION})"
        )));
    }
    let n = u64_at(8)? as usize;
    let k = u64_at(16)? as usize;
    let merge_eps = f64_at(24)?;
    let width_cap = f64_at(32)?;
    if k == 0 || k > 1 << 24 {
        return Err(CliError::msg(format!("snapshot state count {k} out of range")));
    }
    let mut counts = Vec::with_capacity(k);
    for i in 0..k {
        counts.push(u64_at(40 + 8 * i)? as usize);
    }
    let mut offset = 40 + 8 * k;
    let mut per_state = Vec::with_capacity(k);
    for &count in &counts {
        let mut clusters = Vec::with_capacity(count);
        for _ in 0..count {
            let lo = f64_at(offset)?;
            let hi = f64_at(offset + 8)?;
            let mass_lo = f64_at(offset + 16)?;
            let mass_hi = f64_at(offset + 24)?;
            offset += 32;
            if !(lo <= hi && mass_lo <= mass_hi) {
                return Err(CliError::msg("snapshot cluster bounds inverted".into()));
            }
            clusters.push(Cluster { lo, hi, mass: Iv::new(mass_lo, mass_hi) });
        }
        per_state.push(clusters);
    }
    if offset != bytes.len() {
        return Err(CliError::msg(format!(
            "snapshot has {} trailing bytes",
            bytes.len() - offset
        )));
    }
    Ok(SumDistribution { n, per_state, merge_eps, width_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldp_core::deviations::{dp_distribution, DpOptions};
    use ldp_core::potentials::Potential;
    use ldp_core::sft::MarkovModel;
    use ldp_core::thermo::normalize_pair;

    fn sample() -> SumDistribution {
        let model = MarkovModel::golden_mean();
        let phi = Potential::zero(&model);
        let psi = Potential::indicator(&model, 0).unwrap();
        let sys = normalize_pair(&model, &phi, &psi).unwrap();
        dp_distribution(&sys, 9, &DpOptions::default()).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dist = sample();
        let bytes = write(&dist);
        assert_eq!(&bytes[..4], b"LDPD");
        assert_eq!(bytes[4], 1);
        let back = read(&bytes).unwrap();
        assert_eq!(back.n, dist.n);
        assert_eq!(back.per_state.len(), dist.per_state.len());
        for (a, b) in dist.iter_clusters().zip(back.iter_clusters()) {
            assert_eq!(a.lo.to_bits(), b.lo.to_bits());
            assert_eq!(a.hi.to_bits(), b.hi.to_bits());
            assert_eq!(a.mass.lo.to_bits(), b.mass.lo.to_bits());
            assert_eq!(a.mass.hi.to_bits(), b.mass.hi.to_bits());
        }
        // and the writer is deterministic
        assert_eq!(bytes, write(&dist));
    }

    #[test]
    fn corrupted_snapshots_are_rejected() {
        let dist = sample();
        let mut bytes = write(&dist);
        assert!(read(&bytes[..bytes.len() - 1]).unwrap_err().to_string().contains("truncated"));
        bytes[0] = b'X';
        assert!(read(&bytes).unwrap_err().to_string().contains("magic"));
    }
}
