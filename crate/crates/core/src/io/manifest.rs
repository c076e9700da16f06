//! JSON run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    NotConverged,
    Failed,
}

/// Record of one run. Serialised through `serde_json::Value`, whose maps are
/// ordered, so keys come out sorted.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub mode: String,
    pub run_id: String,
    pub config: BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_time_s: f64,
    pub status: RunStatus,
    pub exit_code: i32,
    pub error: Option<String>,
    pub results: serde_json::Value,
    /// File name (relative to the run directory) to its sha256 digest.
    pub files: BTreeMap<String, String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("manifest.json"), self.to_json()?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn keys_sorted() {
        let m = Manifest {
            version: "0".into(),
            mode: "solve".into(),
            run_id: "r".into(),
            config: BTreeMap::from([("z".into(), "1".into()), ("a".into(), "2".into())]),
            started_unix: 0.0,
            finished_unix: 0.0,
            wall_time_s: 0.0,
            status: RunStatus::Ok,
            exit_code: 0,
            error: None,
            results: serde_json::json!({"b": 1, "a": 2}),
            files: BTreeMap::new(),
        };
        let s = m.to_json().unwrap();
        let top: Vec<usize> = ["\"config\"", "\"error\"", "\"exit_code\"", "\"files\"", "\"mode\"", "\"results\"", "\"version\""]
            .iter()
            .map(|k| s.find(k).unwrap())
            .collect();
        assert!(top.windows(2).all(|w| w[0] < w[1]), "{s}");
        assert!(s.find("\"a\": 2").unwrap() < s.find("\"b\": 1").unwrap());
    }
}
