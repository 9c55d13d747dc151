use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sha256: String,
    /// RFC 3339 retrieval time.
    pub retrieved_at: String,
}

/// `manifest.json` of a cache directory: URL to content hash and retrieval time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(cache_dir: &Path) -> Result<Self> {
        let path = cache_dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, cache_dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(cache_dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }
}

fn download(url: &str) -> Result<Vec<u8>> {
    if let Some(path) = url.strip_prefix("file://") {
        return Ok(std::fs::read(path)?);
    }
    let response = ureq::get(url).call().map_err(|e| Error::Http(e.to_string()))?;
    let mut body = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut body)
        .map_err(|e| Error::Http(e.to_string()))?;
    Ok(body)
}

/// Retrieves `url` into `cache_dir/<sha256>.csv` and records it in the manifest.
///
/// Returns the path of the cached file. Re-fetching identical content reuses the file.
pub fn fetch(url: &str, cache_dir: &Path) -> Result<PathBuf> {
    let body = download(url)?;
    std::fs::create_dir_all(cache_dir)?;
    let hash = hex::encode(Sha256::digest(&body));
    let path = cache_dir.join(format!("{hash}.csv"));
    if !path.exists() {
        let tmp = cache_dir.join(format!(".{hash}.partial"));
        std::fs::write(&tmp, &body)?;
        std::fs::rename(&tmp, &path)?;
    }
    let mut manifest = Manifest::load(cache_dir)?;
    manifest.entries.insert(
        url.to_string(),
        ManifestEntry {
            sha256: hash,
            retrieved_at: chrono::Utc::now().to_rfc3339(),
        },
    );
    manifest.save(cache_dir)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::net::TcpListener;

    #[test]
    fn fetch_over_http_caches_by_hash() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let body = "Province_State,1/22/20\nHawaii,0\n";
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 1024];
            let _ = stream.read(&mut buf).unwrap();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
        });
        let dir = tempfile::tempdir().unwrap();
        let url = format!("http://{addr}/confirmed.csv");
        let path = fetch(&url, dir.path()).unwrap();
        server.join().unwrap();

        let expected_hash = hex::encode(Sha256::digest(body.as_bytes()));
        assert_eq!(path, dir.path().join(format!("{expected_hash}.csv")));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), body);
        let manifest = Manifest::load(dir.path()).unwrap();
        assert_eq!(manifest.entries[&url].sha256, expected_hash);
    }

    #[test]
    fn fetch_local_file() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.csv");
        std::fs::write(&src, "a,b\n").unwrap();
        let cache = dir.path().join("cache");
        let url = format!("file://{}", src.display());
        let first = fetch(&url, &cache).unwrap();
        let second = fetch(&url, &cache).unwrap();
        assert_eq!(first, second);
        assert_eq!(Manifest::load(&cache).unwrap().entries.len(), 1);
    }
}
