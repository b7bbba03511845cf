//! Network checkpoints.
//!
//! Container layout: a short ASCII header (format version, dimensions, gain
//! bits, init kind, seed, optional schedule), a `data` marker line, then one
//! length-prefixed little-endian f64 array per weight matrix in row-major
//! order, and a trailing 64-bit FNV-1a checksum over everything before it.
//! The gain is stored as raw bits so round trips are exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::dynamics::{Rank1Network, RankNNetwork};
use crate::error::{Error, Result};
use crate::experiments::{Architecture, Network};
use crate::spectral_init::InitKind;
use crate::training::TrainingSchedule;

const MAGIC: &str = "RFORCE-CHECKPOINT v1";

/// Run context stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub schedule: Option<TrainingSchedule>,
}

pub fn save_checkpoint(
    net: &Network,
    meta: &CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    let (arch, n, k, gain, init, arrays): (_, _, _, f64, &InitKind, Vec<&DMatrix<f64>>) =
        match net {
            Network::Rank1(r) => (
                Architecture::Rank1,
                r.n(),
                r.k(),
                r.gain,
                &r.init_kind,
                vec![&r.reservoir, &r.w_feedback, &r.w_readout],
            ),
            Network::RankN(r) => (
                Architecture::RankN,
                r.n(),
                r.k(),
                r.gain,
                &r.init_kind,
                vec![&r.reservoir, &r.error_injection, &r.w_readout],
            ),
        };
    writeln!(buf, "{MAGIC}")?;
    writeln!(buf, "arch {arch}")?;
    writeln!(buf, "n {n}")?;
    writeln!(buf, "k {k}")?;
    writeln!(buf, "gain_bits {:016x}", gain.to_bits())?;
    writeln!(
        buf,
        "init {}",
        serde_json::to_string(init).map_err(|e| Error::format(e.to_string()))?
    )?;
    writeln!(buf, "seed {}", meta.seed)?;
    if let Some(s) = &meta.schedule {
        writeln!(
            buf,
            "schedule {}",
            serde_json::to_string(s).map_err(|e| Error::format(e.to_string()))?
        )?;
    }
    writeln!(buf, "data")?;
    for a in arrays {
        buf.extend_from_slice(&(a.len() as u64).to_le_bytes());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                buf.extend_from_slice(&a[(i, j)].to_le_bytes());
            }
        }
    }
    let sum = fnv1a(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, CheckpointMeta)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 {
        return Err(Error::format("checkpoint truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let declared = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if fnv1a(body) != declared {
        return Err(Error::format("checkpoint checksum mismatch"));
    }

    // Header: ASCII lines up to the `data` marker.
    let mut offset = 0usize;
    let mut lines: Vec<String> = Vec::new();
    loop {
        let rest = &body[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("checkpoint header unterminated"))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::format("checkpoint header is not ASCII"))?
            .to_string();
        offset += nl + 1;
        if line == "data" {
            break;
        }
        lines.push(line);
    }
    if lines.first().map(String::as_str) != Some(MAGIC) {
        return Err(Error::format("unsupported checkpoint version"));
    }
    let field = |name: &str| -> Result<&str> {
        lines
            .iter()
            .find_map(|l| l.strip_prefix(&format!("{name} ")))
            .ok_or_else(|| Error::format(format!("checkpoint missing field `{name}`")))
    };
    let arch: Architecture = field("arch")?.parse()?;
    let n: usize = field("n")?
        .parse()
        .map_err(|_| Error::format("bad n field"))?;
    let k: usize = field("k")?
        .parse()
        .map_err(|_| Error::format("bad k field"))?;
    let gain = f64::from_bits(
        u64::from_str_radix(field("gain_bits")?, 16)
            .map_err(|_| Error::format("bad gain bits"))?,
    );
    let init: InitKind = serde_json::from_str(field("init")?)
        .map_err(|e| Error::format(format!("bad init field: {e}")))?;
    let seed: u64 = field("seed")?
        .parse()
        .map_err(|_| Error::format("bad seed field"))?;
    let schedule: Option<TrainingSchedule> = match field("schedule") {
        Ok(s) => Some(
            serde_json::from_str(s).map_err(|e| Error::format(format!("bad schedule: {e}")))?,
        ),
        Err(_) => None,
    };

    let mut cursor = offset;
    let mut read_array = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
        let need = 8 + rows * cols * 8;
        if body.len() < cursor + need {
            return Err(Error::format("checkpoint truncated inside array"));
        }
        let count = u64::from_le_bytes(body[cursor..cursor + 8].try_into().unwrap()) as usize;
        cursor += 8;
        if count != rows * cols {
            return Err(Error::format(format!(
                "array length {count} does not match declared shape {rows}x{cols}"
            )));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] =
                    f64::from_le_bytes(body[cursor..cursor + 8].try_into().unwrap());
                cursor += 8;
            }
        }
        Ok(m)
    };

    let reservoir = read_array(n, n)?;
    let aux = read_array(n, k)?;
    let w_readout = read_array(n, k)?;
    let net = match arch {
        Architecture::Rank1 => Network::Rank1(Rank1Network {
            reservoir,
            gain,
            w_feedback: aux,
            w_readout,
            init_kind: init,
        }),
        Architecture::RankN => Network::RankN(RankNNetwork {
            reservoir,
            gain,
            w_readout,
            error_injection: aux,
            init_kind: init,
        }),
    };
    Ok((net, CheckpointMeta { seed, schedule }))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("rforce-checkpoint-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn roundtrip_bit_exact() {
        let mut net = Rank1Network::normal_init(24, 2, 1.37, 0.5, 9).unwrap();
        net.w_readout[(3, 1)] = 0.123456789123456789;
        let meta = CheckpointMeta {
            seed: 99,
            schedule: Some(TrainingSchedule::default()),
        };
        let path = temp_path("roundtrip.rfc");
        save_checkpoint(&Network::Rank1(net.clone()), &meta, &path).unwrap();
        let (loaded, meta2) = load_checkpoint(&path).unwrap();
        assert_eq!(meta, meta2);
        match loaded {
            Network::Rank1(l) => {
                assert_eq!(l.reservoir, net.reservoir);
                assert_eq!(l.w_feedback, net.w_feedback);
                assert_eq!(l.w_readout, net.w_readout);
                assert_eq!(l.gain.to_bits(), net.gain.to_bits());
                assert_eq!(l.init_kind, net.init_kind);
            }
            _ => panic!("wrong architecture"),
        }
    }

    #[test]
    fn rank_n_roundtrip() {
        let net = RankNNetwork::normal_init(16, 1, 1.8, 1.0, 4).unwrap();
        let meta = CheckpointMeta {
            seed: 1,
            schedule: None,
        };
        let path = temp_path("rankn.rfc");
        save_checkpoint(&Network::RankN(net.clone()), &meta, &path).unwrap();
        let (loaded, _) = load_checkpoint(&path).unwrap();
        match loaded {
            Network::RankN(l) => {
                assert_eq!(l.reservoir, net.reservoir);
                assert_eq!(l.error_injection, net.error_injection);
            }
            _ => panic!("wrong architecture"),
        }
    }

    #[test]
    fn corruption_is_detected() {
        let net = Rank1Network::normal_init(8, 1, 1.0, 1.0, 2).unwrap();
        let meta = CheckpointMeta {
            seed: 0,
            schedule: None,
        };
        let path = temp_path("corrupt.rfc");
        save_checkpoint(&Network::Rank1(net), &meta, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn truncation_is_detected() {
        let net = Rank1Network::normal_init(8, 1, 1.0, 1.0, 2).unwrap();
        let meta = CheckpointMeta {
            seed: 0,
            schedule: None,
        };
        let path = temp_path("trunc.rfc");
        save_checkpoint(&Network::Rank1(net), &meta, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
