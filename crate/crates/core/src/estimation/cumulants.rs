//! Joint cumulants of the heterodyne pair (z_plus, z_minus) up to total
//! order four, with standard errors from batching.
//!
//! Orders are keyed (n, m, k, l): the moment is
//! <(z+^*)^n (z+)^m (z-^*)^k (z-)^l>; cumulants follow by the set-partition
//! (Leonov-Shiryaev) formula over the slots of each key.

use super::{EstimationError, QuadratureSamples};
use crate::C64;
use std::collections::BTreeMap;
use std::path::Path;

/// Powers of (z+^*, z+, z-^*, z-).
pub type MomentKey = (u8, u8, u8, u8);

pub const MAX_ORDER: u8 = 4;
pub const MIN_SAMPLES: usize = 10_000;
const BATCHES: usize = 20;

fn order(k: MomentKey) -> u8 {
    k.0 + k.1 + k.2 + k.3
}

fn mirror(k: MomentKey) -> MomentKey {
    (k.1, k.0, k.3, k.2)
}

/// All keys with 1 <= order <= max, ascending.
pub fn all_keys(max: u8) -> Vec<MomentKey> {
    let mut out = Vec::new();
    for n in 0..=max {
        for m in 0..=max - n {
            for k in 0..=max - n - m {
                for l in 0..=max - n - m - k {
                    let key = (n, m, k, l);
                    if order(key) >= 1 {
                        out.push(key);
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Variable index (0..4) of every slot of the key, e.g. (2,0,1,0) -> [0,0,2].
fn slots(key: MomentKey) -> Vec<usize> {
    let mut s = Vec::with_capacity(order(key) as usize);
    for (var, count) in [key.0, key.1, key.2, key.3].into_iter().enumerate() {
        for _ in 0..count {
            s.push(var);
        }
    }
    s
}

fn block_key(slot_vars: &[usize], block: &[usize]) -> MomentKey {
    let mut counts = [0u8; 4];
    for &pos in block {
        counts[slot_vars[pos]] += 1;
    }
    (counts[0], counts[1], counts[2], counts[3])
}

/// Set partitions of {0..r-1}; r <= 4 in practice (at most 15 partitions).
fn set_partitions(r: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(next: usize, r: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if next == r {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(next);
            rec(next + 1, r, current, out);
            current[b].pop();
        }
        current.push(vec![next]);
        rec(next + 1, r, current, out);
        current.pop();
    }
    let mut out = Vec::new();
    rec(0, r, &mut Vec::new(), &mut out);
    out
}

/// Cumulants for every key present in `moments` (order <= max_order), via
/// sum over set partitions with (-1)^(b-1) (b-1)! weights. Every sub-key a
/// partition needs must be present.
pub fn moments_to_cumulants(
    moments: &BTreeMap<MomentKey, C64>,
    max_order: u8,
) -> Result<BTreeMap<MomentKey, C64>, EstimationError> {
    let mut out = BTreeMap::new();
    for (&key, _) in moments.iter().filter(|(k, _)| order(**k) <= max_order) {
        let vars = slots(key);
        let mut acc = C64::new(0.0, 0.0);
        for partition in set_partitions(vars.len()) {
            let b = partition.len();
            let sign = if (b - 1) % 2 == 0 { 1.0 } else { -1.0 };
            let weight = sign * (1..b).product::<usize>() as f64;
            let mut term = C64::new(weight, 0.0);
            for block in &partition {
                let bk = block_key(&vars, block);
                let m = moments
                    .get(&bk)
                    .ok_or(EstimationError::MissingMoment(bk.0, bk.1, bk.2, bk.3))?;
                term *= m;
            }
            acc += term;
        }
        out.insert(key, acc);
    }
    Ok(out)
}

/// Inverse of `moments_to_cumulants`: moment = sum over partitions of the
/// product of block cumulants.
pub fn cumulants_to_moments(
    cumulants: &BTreeMap<MomentKey, C64>,
    max_order: u8,
) -> Result<BTreeMap<MomentKey, C64>, EstimationError> {
    let mut out = BTreeMap::new();
    for (&key, _) in cumulants.iter().filter(|(k, _)| order(**k) <= max_order) {
        let vars = slots(key);
        let mut acc = C64::new(0.0, 0.0);
        for partition in set_partitions(vars.len()) {
            let mut term = C64::new(1.0, 0.0);
            for block in &partition {
                let bk = block_key(&vars, block);
                let c = cumulants
                    .get(&bk)
                    .ok_or(EstimationError::MissingMoment(bk.0, bk.1, bk.2, bk.3))?;
                term *= c;
            }
            acc += term;
        }
        out.insert(key, acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantEntry {
    pub value: C64,
    pub stderr: f64,
}

/// Estimated cumulants keyed by order tuple, 1 <= order <= 4. Conjugation
/// symmetry entry(n,m,k,l) = conj(entry(m,n,l,k)) holds exactly: mirror
/// entries are constructed from their canonical partner.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantTable {
    pub entries: BTreeMap<MomentKey, CumulantEntry>,
}

impl CumulantTable {
    pub fn get(&self, n: u8, m: u8, k: u8, l: u8) -> Option<&CumulantEntry> {
        self.entries.get(&(n, m, k, l))
    }

    /// Largest |entry(n,m,k,l) - conj(entry(m,n,l,k))|; zero by construction.
    pub fn conjugation_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (&key, e) in &self.entries {
            if let Some(me) = self.entries.get(&mirror(key)) {
                worst = worst.max((e.value - me.value.conj()).norm());
            }
        }
        worst
    }

    /// JSON object keyed "n,m,k,l" with re/im/stderr fields.
    pub fn to_json_string(&self) -> String {
        let mut map = serde_json::Map::new();
        for (&(n, m, k, l), e) in &self.entries {
            let mut obj = serde_json::Map::new();
            obj.insert("re".into(), serde_json::json!(e.value.re));
            obj.insert("im".into(), serde_json::json!(e.value.im));
            obj.insert("stderr".into(), serde_json::json!(e.stderr));
            map.insert(format!("{n},{m},{k},{l}"), serde_json::Value::Object(obj));
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, EstimationError> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| EstimationError::Csv(e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| EstimationError::Csv("expected a JSON object".into()))?;
        let mut entries = BTreeMap::new();
        for (key, val) in obj {
            let parts: Vec<u8> = key
                .split(',')
                .map(|p| p.trim().parse::<u8>())
                .collect::<Result<_, _>>()
                .map_err(|e| EstimationError::Csv(format!("bad key {key:?}: {e}")))?;
            if parts.len() != 4 {
                return Err(EstimationError::Csv(format!("bad key {key:?}")));
            }
            let num = |name: &str| -> Result<f64, EstimationError> {
                val.get(name)
                    .and_then(|x| x.as_f64())
                    .ok_or_else(|| EstimationError::Csv(format!("missing field {name} in {key}")))
            };
            entries.insert(
                (parts[0], parts[1], parts[2], parts[3]),
                CumulantEntry {
                    value: C64::new(num("re")?, num("im")?),
                    stderr: num("stderr")?,
                },
            );
        }
        Ok(CumulantTable { entries })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), EstimationError> {
        std::fs::write(path, self.to_json_string()).map_err(|e| EstimationError::Csv(e.to_string()))
    }

    pub fn read_json(path: &Path) -> Result<Self, EstimationError> {
        let s = std::fs::read_to_string(path).map_err(|e| EstimationError::Csv(e.to_string()))?;
        Self::from_json_str(&s)
    }
}

/// Raw sample moments of one contiguous sample range for all keys.
fn range_moments(samples: &QuadratureSamples, lo: usize, hi: usize) -> BTreeMap<MomentKey, C64> {
    let keys = all_keys(MAX_ORDER);
    let mut acc = vec![C64::new(0.0, 0.0); keys.len()];
    for i in lo..hi {
        let zp = samples.z_plus[i];
        let zm = samples.z_minus[i];
        let bases = [zp.conj(), zp, zm.conj(), zm];
        let mut pows = [[C64::new(1.0, 0.0); 5]; 4];
        for v in 0..4 {
            for e in 1..=4usize {
                pows[v][e] = pows[v][e - 1] * bases[v];
            }
        }
        for (j, &(n, m, k, l)) in keys.iter().enumerate() {
            acc[j] += pows[0][n as usize] * pows[1][m as usize] * pows[2][k as usize]
                * pows[3][l as usize];
        }
    }
    let count = (hi - lo) as f64;
    keys.into_iter().zip(acc.into_iter().map(|s| s / count)).collect()
}

/// Batch-mean cumulant estimates with standard errors from the spread over
/// 20 equal batches. Needs at least 10^4 samples.
pub fn estimate_cumulants(samples: &QuadratureSamples) -> Result<CumulantTable, EstimationError> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(EstimationError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let per = n / BATCHES;
    let keys = all_keys(MAX_ORDER);
    let mut per_key: BTreeMap<MomentKey, Vec<C64>> =
        keys.iter().map(|&k| (k, Vec::with_capacity(BATCHES))).collect();
    for b in 0..BATCHES {
        let moments = range_moments(samples, b * per, (b + 1) * per);
        let cums = moments_to_cumulants(&moments, MAX_ORDER)?;
        for (&k, &v) in &cums {
            per_key.get_mut(&k).expect("key set fixed").push(v);
        }
    }
    let bf = BATCHES as f64;
    let mut entries = BTreeMap::new();
    for &key in &keys {
        if mirror(key) < key {
            continue; // filled from the canonical partner below
        }
        let vals = &per_key[&key];
        let mean: C64 = vals.iter().sum::<C64>() / bf;
        let (mut var_re, mut var_im) = (0.0, 0.0);
        for v in vals {
            var_re += (v.re - mean.re).powi(2);
            var_im += (v.im - mean.im).powi(2);
        }
        var_re /= bf - 1.0;
        var_im /= bf - 1.0;
        let stderr = ((var_re + var_im) / bf).sqrt();
        let value = if mirror(key) == key {
            // self-mirror cumulants are real in exact arithmetic
            C64::new(mean.re, 0.0)
        } else {
            mean
        };
        entries.insert(key, CumulantEntry { value, stderr });
        if mirror(key) != key {
            entries.insert(
                mirror(key),
                CumulantEntry {
                    value: value.conj(),
                    stderr,
                },
            );
        }
    }
    Ok(CumulantTable { entries })
}
