//! Binary model snapshots.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      8 bytes  "MMSBMSNP"
//! version    u32
//! body_len   u64
//! body       body_len bytes
//! crc32      u32      checksum of body
//! ```
//!
//! The body holds the rating scale, the external user and item ids, and one
//! record per run (group counts, provenance, θ, η, p). Floats are stored as
//! their raw bits, so parameters round-trip exactly.

use std::fs;
use std::path::Path;

use crate::dataset::Dataset;
use crate::em::{FitConfig, FitResult};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::params::{validate_params, ModelParams};
use crate::scale::RatingScale;

const MAGIC: &[u8; 8] = b"MMSBMSNP";
pub const FORMAT_VERSION: u32 = 1;
const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config: FitConfig,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRun {
    pub params: ModelParams,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub scale: RatingScale,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub runs: Vec<SnapshotRun>,
}

impl ModelSnapshot {
    pub fn from_ensemble(ensemble: &Ensemble, dataset: &Dataset) -> Self {
        let runs = (0..ensemble.n_runs())
            .map(|idx| {
                let run = ensemble.run(idx);
                SnapshotRun {
                    params: run.params.clone(),
                    provenance: Provenance {
                        seed: ensemble.seed(idx),
                        config: FitConfig {
                            seed: ensemble.seed(idx),
                            ..ensemble.config().clone()
                        },
                        iterations: run.iterations_run,
                        converged: run.converged,
                        log_likelihood: run.log_likelihood(),
                    },
                }
            })
            .collect();
        Self {
            scale: ensemble.scale().clone(),
            user_ids: dataset.user_ids().to_vec(),
            item_ids: dataset.item_ids().to_vec(),
            runs,
        }
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        let first = self.runs.first().ok_or(Error::EmptyInput("snapshot runs"))?;
        let runs = self
            .runs
            .iter()
            .map(|run| {
                (
                    FitResult {
                        params: run.params.clone(),
                        log_likelihood_trace: vec![run.provenance.log_likelihood],
                        iterations_run: run.provenance.iterations,
                        converged: run.provenance.converged,
                    },
                    run.provenance.seed,
                )
            })
            .collect();
        Ensemble::from_runs(self.scale.clone(), first.provenance.config.clone(), runs)
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|i| i == id)
    }

    fn check(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::Snapshot("no runs".into()));
        }
        for (idx, run) in self.runs.iter().enumerate() {
            let p = &run.params;
            if p.n_users() != self.user_ids.len() || p.n_items() != self.item_ids.len() || p.n_labels() != self.scale.len()
            {
                return Err(Error::Snapshot(format!("run {idx}: parameter shape does not match id tables")));
            }
            if let Some(v) = validate_params(p, VALIDATION_TOL).first() {
                return Err(Error::Snapshot(format!("run {idx}: invalid parameters ({v})")));
            }
        }
        Ok(())
    }
}

pub fn write_snapshot(snapshot: &ModelSnapshot, path: &Path) -> Result<()> {
    fs::write(path, encode(snapshot)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<ModelSnapshot> {
    decode(&fs::read(path)?)
}

pub fn encode(snapshot: &ModelSnapshot) -> Result<Vec<u8>> {
    snapshot.check()?;
    let mut body = Writer::default();
    body.u32(snapshot.scale.len() as u32);
    for (label, value) in snapshot.scale.labels().iter().zip(snapshot.scale.values()) {
        body.str(label);
        body.f64(*value);
    }
    for ids in [&snapshot.user_ids, &snapshot.item_ids] {
        body.u64(ids.len() as u64);
        ids.iter().for_each(|id| body.str(id));
    }
    body.u32(snapshot.runs.len() as u32);
    for run in &snapshot.runs {
        let p = &run.params;
        let prov = &run.provenance;
        body.u32(p.user_groups() as u32);
        body.u32(p.item_groups() as u32);
        body.u64(prov.seed);
        body.u64(prov.config.max_iterations as u64);
        body.f64(prov.config.tol);
        body.f64(prov.config.prob_floor);
        body.u64(prov.iterations as u64);
        body.0.push(u8::from(prov.converged));
        body.f64(prov.log_likelihood);
        for block in [p.theta(), p.eta(), p.p()] {
            block.iter().for_each(|x| body.f64(*x));
        }
    }
    let body = body.0;
    let mut out = Vec::with_capacity(body.len() + 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<ModelSnapshot> {
    let corrupt = |what: &str| Error::Snapshot(format!("corrupted file: {what}"));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let body_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() != 20usize.saturating_add(body_len).saturating_add(4) {
        return Err(corrupt("length mismatch"));
    }
    let body = &bytes[20..20 + body_len];
    let crc = u32::from_le_bytes(bytes[20 + body_len..].try_into().unwrap());
    if crc32fast::hash(body) != crc {
        return Err(corrupt("checksum mismatch"));
    }

    let mut r = Reader { buf: body, pos: 0 };
    let n_labels = r.u32()? as usize;
    let mut labels = Vec::with_capacity(n_labels.min(1 << 16));
    let mut values = Vec::with_capacity(n_labels.min(1 << 16));
    for _ in 0..n_labels {
        labels.push(r.str()?);
        values.push(r.f64()?);
    }
    let scale = RatingScale::new(labels, values)?;
    let mut tables = Vec::with_capacity(2);
    for _ in 0..2 {
        let n = r.u64()? as usize;
        let mut ids = Vec::with_capacity(n.min(body_len));
        for _ in 0..n {
            ids.push(r.str()?);
        }
        tables.push(ids);
    }
    let item_ids = tables.pop().unwrap();
    let user_ids = tables.pop().unwrap();
    let n_runs = r.u32()? as usize;
    let mut runs = Vec::with_capacity(n_runs.min(1 << 16));
    for _ in 0..n_runs {
        let k = r.u32()? as usize;
        let l = r.u32()? as usize;
        let seed = r.u64()?;
        let max_iterations = r.u64()? as usize;
        let tol = r.f64()?;
        let prob_floor = r.f64()?;
        let iterations = r.u64()? as usize;
        let converged = r.u8()? != 0;
        let log_likelihood = r.f64()?;
        let theta = r.f64s(user_ids.len().checked_mul(k).ok_or_else(|| corrupt("size overflow"))?)?;
        let eta = r.f64s(item_ids.len().checked_mul(l).ok_or_else(|| corrupt("size overflow"))?)?;
        let p = r.f64s(k * l * scale.len())?;
        let params = ModelParams::new(k, l, scale.len(), theta, eta, p).map_err(|e| Error::Snapshot(e.to_string()))?;
        runs.push(SnapshotRun {
            params,
            provenance: Provenance {
                seed,
                config: FitConfig {
                    user_groups: k,
                    item_groups: l,
                    max_iterations,
                    tol,
                    seed,
                    prob_floor,
                },
                iterations,
                converged,
                log_likelihood,
            },
        });
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    let snapshot = ModelSnapshot {
        scale,
        user_ids,
        item_ids,
        runs,
    };
    snapshot.check()?;
    Ok(snapshot)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Snapshot("corrupted file: truncated body".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Snapshot("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Snapshot("invalid utf-8 in string".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::init_params;

    fn snapshot() -> ModelSnapshot {
        let config = FitConfig { seed: 3, ..FitConfig::with_groups(2, 3) };
        let params = init_params(&config, 4, 5, 5);
        ModelSnapshot {
            scale: RatingScale::integer(1, 5).unwrap(),
            user_ids: (0..4).map(|u| format!("user{u}")).collect(),
            item_ids: (0..5).map(|i| format!("item{i}")).collect(),
            runs: vec![SnapshotRun {
                params,
                provenance: Provenance {
                    seed: 3,
                    config,
                    iterations: 12,
                    converged: true,
                    log_likelihood: -123.456,
                },
            }],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let snap = snapshot();
        let back = decode(&encode(&snap).unwrap()).unwrap();
        assert_eq!(back, snap);
        for (a, b) in back.runs[0].params.theta().iter().zip(snap.runs[0].params.theta()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = encode(&snapshot()).unwrap();
        let err = decode(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(err.to_string().contains("corrupted"), "{err}");
    }

    #[test]
    fn flipped_bit_is_corrupt() {
        let mut bytes = encode(&snapshot()).unwrap();
        bytes[40] ^= 0x10;
        assert!(decode(&bytes).unwrap_err().to_string().contains("checksum"));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode(&snapshot()).unwrap();
        bytes[8] = 99;
        assert!(decode(&bytes).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn invalid_params_refused_on_write() {
        let mut snap = snapshot();
        snap.runs[0].params.theta_mut()[0] += 0.5;
        assert!(encode(&snap).is_err());
    }
}
