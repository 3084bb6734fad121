//! Station document fetcher with a content-addressed on-disk cache.
//!
//! Layout under the cache directory:
//!
//! ```text
//! blobs/<sha256 of body>
//! refs/<sha256 of url>      (contains the blob hash)
//! ```

use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable overriding the default cache directory.
pub const CACHE_DIR_ENV: &str = "PDEDISC_CACHE_DIR";

pub trait Transport {
    fn get(&self, url: &str) -> Result<Vec<u8>>;
}

/// Blocking HTTP GET.
#[derive(Debug, Clone, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>> {
        let resp = ureq::get(url).call().map_err(|e| Error::Http(format!("{url}: {e}")))?;
        let mut body = Vec::new();
        resp.into_body()
            .into_reader()
            .read_to_end(&mut body)
            .map_err(|e| Error::Http(format!("{url}: {e}")))?;
        Ok(body)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchedDocument {
    pub id: String,
    pub url: String,
    pub hash: String,
    pub body: Vec<u8>,
    pub from_cache: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchReport {
    pub documents: Vec<FetchedDocument>,
    /// `(station id, message)` for stations that could not be fetched.
    pub errors: Vec<(String, String)>,
    pub network_calls: usize,
}

pub fn default_cache_dir() -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => std::env::temp_dir().join("pdedisc-cache"),
    }
}

pub fn station_url(base_url: &str, id: &str, period: &str) -> String {
    format!("{}/station/{id}/period/{period}/data.json", base_url.trim_end_matches('/'))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A cache entry is used only if its blob still matches its hash.
fn cached(cache_dir: &Path, url: &str) -> Option<(String, Vec<u8>)> {
    let hash = std::fs::read_to_string(cache_dir.join("refs").join(sha_hex(url.as_bytes()))).ok()?;
    let hash = hash.trim().to_string();
    let body = std::fs::read(cache_dir.join("blobs").join(&hash)).ok()?;
    (sha_hex(&body) == hash).then_some((hash, body))
}

fn store(cache_dir: &Path, url: &str, body: &[u8]) -> Result<String> {
    let hash = sha_hex(body);
    let blobs = cache_dir.join("blobs");
    let refs = cache_dir.join("refs");
    std::fs::create_dir_all(&blobs)?;
    std::fs::create_dir_all(&refs)?;
    let blob = blobs.join(&hash);
    if !blob.exists() {
        write_atomic(&blob, body)?;
    }
    write_atomic(&refs.join(sha_hex(url.as_bytes())), hash.as_bytes())?;
    Ok(hash)
}

/// Fetches one document per station, serving cache hits without touching the
/// transport. Failures are collected per station.
pub fn fetch_observations(
    transport: &dyn Transport,
    base_url: &str,
    ids: &[String],
    period: &str,
    cache_dir: &Path,
) -> Result<FetchReport> {
    let mut report = FetchReport::default();
    for id in ids {
        let url = station_url(base_url, id, period);
        if let Some((hash, body)) = cached(cache_dir, &url) {
            log::debug!("cache hit {url}");
            report.documents.push(FetchedDocument { id: id.clone(), url, hash, body, from_cache: true });
            continue;
        }
        report.network_calls += 1;
        match transport.get(&url) {
            Ok(body) => {
                let hash = store(cache_dir, &url, &body)?;
                report.documents.push(FetchedDocument { id: id.clone(), url, hash, body, from_cache: false });
            }
            Err(e) => {
                log::warn!("station {id}: {e}");
                report.errors.push((id.clone(), e.to_string()));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    struct Fixture {
        calls: Cell<usize>,
    }

    impl Transport for Fixture {
        fn get(&self, url: &str) -> Result<Vec<u8>> {
            self.calls.set(self.calls.get() + 1);
            if url.contains("/station/bad/") {
                return Err(Error::Http("404".into()));
            }
            Ok(format!("{{\"url\": {url:?}}}").into_bytes())
        }
    }

    #[test]
    fn warm_cache_skips_network() {
        let dir = tempfile::tempdir().unwrap();
        let t = Fixture { calls: Cell::new(0) };
        let ids = vec!["1".to_string(), "2".to_string()];
        let cold = fetch_observations(&t, "http://x/", &ids, "latest-day", dir.path()).unwrap();
        assert_eq!((cold.documents.len(), cold.network_calls, t.calls.get()), (2, 2, 2));
        let warm = fetch_observations(&t, "http://x/", &ids, "latest-day", dir.path()).unwrap();
        assert_eq!((warm.network_calls, t.calls.get()), (0, 2));
        for (a, b) in cold.documents.iter().zip(&warm.documents) {
            assert_eq!(a.body, b.body);
            assert!(b.from_cache);
        }
    }

    #[test]
    fn empty_ids_and_partial_failure() {
        let dir = tempfile::tempdir().unwrap();
        let t = Fixture { calls: Cell::new(0) };
        let r = fetch_observations(&t, "http://x", &[], "p", dir.path()).unwrap();
        assert_eq!(r, FetchReport::default());
        let ids = vec!["bad".to_string(), "ok".to_string()];
        let r = fetch_observations(&t, "http://x", &ids, "p", dir.path()).unwrap();
        assert_eq!((r.documents.len(), r.errors.len()), (1, 1));
    }

    #[test]
    fn corrupted_blob_is_refetched() {
        let dir = tempfile::tempdir().unwrap();
        let t = Fixture { calls: Cell::new(0) };
        let ids = vec!["1".to_string()];
        let r = fetch_observations(&t, "http://x", &ids, "p", dir.path()).unwrap();
        std::fs::write(dir.path().join("blobs").join(&r.documents[0].hash), b"junk").unwrap();
        let r2 = fetch_observations(&t, "http://x", &ids, "p", dir.path()).unwrap();
        assert_eq!(r2.network_calls, 1);
        assert_eq!(r2.documents[0].body, r.documents[0].body);
    }
}
