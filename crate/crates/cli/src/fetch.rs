//! Blocking SDMX-REST download with a single retry and an on-disk cache.

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use log::{info, warn};

use crate::error::CliError;
use tobit_core::io::ecb_url;

/// Directory consulted before (and filled after) every download.
pub const CACHE_ENV: &str = "TOBIT_CACHE_DIR";

#[derive(Debug)]
pub struct Fetched {
    pub url: String,
    pub body: String,
    pub cache_path: Option<PathBuf>,
    pub from_cache: bool,
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

fn cache_file(dir: &Path, key: &str, start: NaiveDate, end: NaiveDate) -> PathBuf {
    dir.join(format!("{key}_{start}_{end}.csv"))
}

fn get_once(client: &reqwest::blocking::Client, url: &str) -> Result<String, String> {
    let resp = client.get(url).header("Accept", "text/csv").send().map_err(|e| e.to_string())?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP status {status}"));
    }
    resp.text().map_err(|e| e.to_string())
}

/// Raw `csvdata` payload for `key` over `[start, end]`. The key and range
/// are validated before any request is made.
pub fn fetch_raw(key: &str, start: NaiveDate, end: NaiveDate, timeout: Duration) -> Result<Fetched, CliError> {
    let url = ecb_url(key, start, end)?;
    let dir = cache_dir();
    if let Some(dir) = &dir {
        let path = cache_file(dir, key, start, end);
        if path.exists() {
            info!("using cached response {}", path.display());
            let body = std::fs::read_to_string(&path)?;
            return Ok(Fetched { url, body, cache_path: Some(path), from_cache: true });
        }
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .user_agent(concat!("tobit/", env!("CARGO_PKG_VERSION")))
        .build()
        .map_err(|e| CliError::Http { url: url.clone(), message: e.to_string() })?;
    let body = match get_once(&client, &url) {
        Ok(body) => body,
        Err(first) => {
            warn!("request failed ({first}); retrying once");
            std::thread::sleep(Duration::from_secs(1));
            get_once(&client, &url).map_err(|message| CliError::Http { url: url.clone(), message })?
        }
    };
    let mut cache_path = None;
    if let Some(dir) = &dir {
        std::fs::create_dir_all(dir)?;
        let path = cache_file(dir, key, start, end);
        std::fs::write(&path, &body)?;
        cache_path = Some(path);
    }
    Ok(Fetched { url, body, cache_path, from_cache: false })
}
