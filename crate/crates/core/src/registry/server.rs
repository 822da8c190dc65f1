use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::json;
use tiny_http::{Header, Response, Server};

use super::{names_equal, LocalRegistry, RegistryError};

/// Serves a local registry over HTTP in the release-document format, on an
/// ephemeral loopback port. Stops when dropped.
pub struct LocalIndexServer {
    base_url: String,
    server: Arc<Server>,
    unavailable: Arc<AtomicBool>,
    hits: Arc<AtomicUsize>,
    worker: Option<JoinHandle<()>>,
}

/// Opens the registry under `root` and serves it.
pub fn serve_local(root: &Path) -> Result<LocalIndexServer, RegistryError> {
    LocalIndexServer::start(LocalRegistry::open(root)?)
}

impl LocalIndexServer {
    pub fn start(registry: LocalRegistry) -> Result<Self, RegistryError> {
        let server = Server::http("127.0.0.1:0")
            .map_err(|e| RegistryError::ProviderUnavailable(format!("binding index server: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| RegistryError::ProviderUnavailable("index server has no IP address".into()))?;
        let base_url = format!("http://{addr}");
        let server = Arc::new(server);
        let unavailable = Arc::new(AtomicBool::new(false));
        let hits = Arc::new(AtomicUsize::new(0));
        let worker = {
            let server = Arc::clone(&server);
            let unavailable = Arc::clone(&unavailable);
            let hits = Arc::clone(&hits);
            let base = base_url.clone();
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    hits.fetch_add(1, Ordering::Relaxed);
                    let response = if unavailable.load(Ordering::Relaxed) {
                        Response::from_string("unavailable").with_status_code(503)
                    } else {
                        route(&registry, &base, request.url())
                    };
                    let _ = request.respond(response);
                }
            })
        };
        Ok(LocalIndexServer {
            base_url,
            server,
            unavailable,
            hits,
            worker: Some(worker),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Makes every request fail with 503, to exercise fail-closed paths.
    pub fn set_unavailable(&self, unavailable: bool) {
        self.unavailable.store(unavailable, Ordering::Relaxed);
    }

    pub fn request_count(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }
}

impl Drop for LocalIndexServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

type Body = Response<std::io::Cursor<Vec<u8>>>;

fn not_found() -> Body {
    Response::from_string("not found").with_status_code(404)
}

fn route(registry: &LocalRegistry, base: &str, url: &str) -> Body {
    let path = url.split('?').next().unwrap_or_default();
    let segments: Vec<Option<String>> = path
        .trim_start_matches('/')
        .split('/')
        .map(percent_decode)
        .collect();
    let segments: Option<Vec<String>> = segments.into_iter().collect();
    match segments.as_deref() {
        Some([files, filename]) if files == "files" => serve_file(registry, filename),
        Some([name, version, json]) if json == "json" => release(registry, base, name, version),
        _ => not_found(),
    }
}

fn release(registry: &LocalRegistry, base: &str, name: &str, version: &str) -> Body {
    let urls: Vec<_> = registry
        .all_records()
        .iter()
        .filter(|r| r.version == version && names_equal(r.ecosystem, &r.name, name))
        .filter_map(|r| {
            let filename = r.artifact_filename.as_ref()?;
            Some(json!({
                "filename": filename,
                "digests": { "sha256": r.artifact_hash.to_hex() },
                "url": format!("{base}/files/{}", super::index_encode(filename)),
            }))
        })
        .collect();
    if urls.is_empty() {
        return not_found();
    }
    let doc = json!({ "info": { "name": name, "version": version }, "urls": urls });
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_data(serde_json::to_vec(&doc).expect("json")).with_header(header)
}

fn serve_file(registry: &LocalRegistry, filename: &str) -> Body {
    let known = registry
        .all_records()
        .iter()
        .any(|r| r.artifact_filename.as_deref() == Some(filename));
    let Some(dir) = registry.archives_dir().filter(|_| known) else {
        return not_found();
    };
    match std::fs::read(dir.join(filename)) {
        Ok(bytes) => Response::from_data(bytes),
        Err(_) => not_found(),
    }
}

fn percent_decode(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = std::str::from_utf8(bytes.get(i + 1..i + 3)?).ok()?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}
