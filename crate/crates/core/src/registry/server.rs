//! Line-delimited JSON wire API over TCP.
//!
//! Each request is one JSON object on one line; each response is one JSON
//! object on one line.
//!
//! | op         | request fields                      | success response                 |
//! |------------|-------------------------------------|----------------------------------|
//! | `ingest`   | `node`, `device`, `t`, `rssi`       | `{"ok":true,"record_id":N}`      |
//! | `config`   | `node`, `t`, optional `horizon`     | `{"ok":true,"assignments":[..]}` |
//! | `assign`   | `device`, `category`                | `{"ok":true}`                    |
//! | `sessions` | `device`, optional `gap`            | `{"ok":true,"sessions":[[s,e]]}` |
//! | `stats`    |                                     | `{"ok":true,"records":N,"users":M}` |
//!
//! Failures are `{"ok":false,"error":"<code>"}`; a line that is not a valid
//! request yields `bad-request` and the connection stays open.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, RwLock};
use std::thread;

use serde::Deserialize;
use serde_json::{json, Value};

use super::store::{Store, StoreError};
use super::{Registry, RegistryError, DEFAULT_PRESENCE_HORIZON, DEFAULT_SESSION_GAP};
use crate::node::{DeviceAddress, DiscoveryReport};

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Request {
    Ingest {
        node: String,
        device: DeviceAddress,
        t: f64,
        rssi: i32,
    },
    Config {
        node: String,
        t: f64,
        horizon: Option<f64>,
    },
    Assign {
        device: DeviceAddress,
        category: String,
    },
    Sessions {
        device: DeviceAddress,
        gap: Option<f64>,
    },
    Stats {},
}

struct Inner {
    registry: Registry,
    store: Option<Store>,
}

/// A registry shared between connections. Mutations hold the write lock
/// for the whole ingest-and-persist step, so there is a single writer.
pub struct Service {
    inner: RwLock<Inner>,
}

impl Service {
    pub fn new(registry: Registry, store: Option<Store>) -> Self {
        Self {
            inner: RwLock::new(Inner { registry, store }),
        }
    }

    /// Runs `f` against a consistent view of the registry.
    pub fn read<T>(&self, f: impl FnOnce(&Registry) -> T) -> T {
        f(&self.inner.read().expect("registry lock poisoned").registry)
    }

    /// Persists a snapshot, if the service has a store.
    pub fn checkpoint(&self) -> Result<(), StoreError> {
        let mut inner = self.inner.write().expect("registry lock poisoned");
        let Inner { registry, store } = &mut *inner;
        match store {
            Some(store) => store.write_snapshot(registry),
            None => Ok(()),
        }
    }

    /// Handles one request line and returns the response line (without
    /// the trailing newline).
    pub fn handle_line(&self, line: &str) -> String {
        let response = match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(req),
            Err(_) => failure("bad-request"),
        };
        response.to_string()
    }

    fn handle(&self, req: Request) -> Value {
        match req {
            Request::Ingest {
                node,
                device,
                t,
                rssi,
            } => {
                let mut inner = self.inner.write().expect("registry lock poisoned");
                let Inner { registry, store } = &mut *inner;
                let report = DiscoveryReport {
                    node_id: node,
                    device,
                    timestamp: t,
                    rssi,
                };
                match registry.ingest(&report) {
                    Ok(record_id) => {
                        if let Some(store) = store {
                            let record = registry.records().last().expect("just ingested");
                            if let Err(e) = store.append(record) {
                                return storage_failure(e);
                            }
                        }
                        json!({ "ok": true, "record_id": record_id })
                    }
                    Err(e) => registry_failure(e),
                }
            }
            Request::Config { node, t, horizon } => self.read(|reg| {
                match reg.config_for_node(&node, t, horizon.unwrap_or(DEFAULT_PRESENCE_HORIZON)) {
                    Ok(list) => {
                        let assignments: Vec<Value> = list
                            .iter()
                            .map(|(device, cfg)| {
                                json!({
                                    "device": device.to_string(),
                                    "uuid": cfg.uuid.to_string(),
                                    "major": cfg.major,
                                    "minor": cfg.minor,
                                    "power": cfg.measured_power,
                                })
                            })
                            .collect();
                        json!({ "ok": true, "assignments": assignments })
                    }
                    Err(e) => registry_failure(e),
                }
            }),
            Request::Assign { device, category } => {
                let mut inner = self.inner.write().expect("registry lock poisoned");
                let Inner { registry, store } = &mut *inner;
                let changed = match registry.assign_category(&device, &category) {
                    Ok(_) => true,
                    Err(e) => return registry_failure(e),
                };
                // categories live only in the snapshot, so persist right away
                if let (true, Some(store)) = (changed, store) {
                    if let Err(e) = store.write_snapshot(registry) {
                        return storage_failure(e);
                    }
                }
                json!({ "ok": true })
            }
            Request::Sessions { device, gap } => self.read(|reg| {
                match reg.entrance_sessions(&device, gap.unwrap_or(DEFAULT_SESSION_GAP)) {
                    Ok(sessions) => json!({ "ok": true, "sessions": sessions }),
                    Err(e) => registry_failure(e),
                }
            }),
            Request::Stats {} => self.read(|reg| {
                json!({ "ok": true, "records": reg.record_count(), "users": reg.users().len() })
            }),
        }
    }
}

fn failure(code: &str) -> Value {
    json!({ "ok": false, "error": code })
}

fn registry_failure(e: RegistryError) -> Value {
    failure(e.code())
}

fn storage_failure(e: StoreError) -> Value {
    json!({ "ok": false, "error": "storage", "detail": e.to_string() })
}

fn serve_connection(service: &Service, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut response = service.handle_line(&line);
        response.push('\n');
        writer.write_all(response.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve(listener: TcpListener, service: Arc<Service>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let service = Arc::clone(&service);
        thread::spawn(move || {
            let _ = serve_connection(&service, stream);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service() -> Service {
        Service::new(Registry::default(), None)
    }

    #[test]
    fn ingest_and_config() {
        let s = service();
        assert_eq!(
            s.handle_line(r#"{"op":"ingest","node":"n03","device":"aa:bb:cc:dd:ee:01","t":123.4,"rssi":-71}"#),
            r#"{"ok":true,"record_id":1}"#
        );
        let resp: Value = serde_json::from_str(
            &s.handle_line(r#"{"op":"config","node":"n03","t":150.0}"#),
        )
        .unwrap();
        assert_eq!(resp["ok"], true);
        let a = &resp["assignments"][0];
        assert_eq!(a["device"], "aa:bb:cc:dd:ee:01");
        assert_eq!(a["major"], 1);
        assert_eq!(a["power"], -59);
        assert_eq!(resp["assignments"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn unknown_node_gives_empty_assignments() {
        assert_eq!(
            service().handle_line(r#"{"op":"config","node":"zz","t":1.0}"#),
            r#"{"ok":true,"assignments":[]}"#
        );
    }

    #[test]
    fn assign_errors() {
        let s = service();
        s.handle_line(r#"{"op":"ingest","node":"n","device":"aa:bb:cc:dd:ee:01","t":1,"rssi":-71}"#);
        assert_eq!(
            s.handle_line(r#"{"op":"assign","device":"aa:bb:cc:dd:ee:01","category":"staff"}"#),
            r#"{"ok":true}"#
        );
        assert_eq!(
            s.handle_line(r#"{"op":"assign","device":"aa:bb:cc:dd:ee:01","category":"x"}"#),
            r#"{"ok":false,"error":"unknown-category"}"#
        );
        assert_eq!(
            s.handle_line(r#"{"op":"assign","device":"aa:bb:cc:dd:ee:02","category":"staff"}"#),
            r#"{"ok":false,"error":"unknown-user"}"#
        );
    }

    #[test]
    fn malformed_requests() {
        let s = service();
        for line in [
            "not json",
            "{}",
            r#"{"op":"launch"}"#,
            r#"{"op":"ingest","node":"n","device":"zz","t":1,"rssi":-1}"#,
            r#"{"op":"ingest","node":"n","t":1,"rssi":-1}"#,
        ] {
            assert_eq!(s.handle_line(line), r#"{"ok":false,"error":"bad-request"}"#, "{line}");
        }
    }

    #[test]
    fn sessions_and_stats() {
        let s = service();
        for t in [0, 6, 12, 1000] {
            s.handle_line(&format!(
                r#"{{"op":"ingest","node":"n","device":"aa:bb:cc:dd:ee:01","t":{t},"rssi":-60}}"#
            ));
        }
        assert_eq!(
            s.handle_line(r#"{"op":"sessions","device":"aa:bb:cc:dd:ee:01"}"#),
            r#"{"ok":true,"sessions":[[0.0,12.0],[1000.0,1000.0]]}"#
        );
        assert_eq!(
            s.handle_line(r#"{"op":"stats"}"#),
            r#"{"ok":true,"records":4,"users":1}"#
        );
    }

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let svc = Arc::new(service());
        thread::spawn(move || serve(listener, svc));

        let stream = TcpStream::connect(addr).unwrap();
        let mut w = stream.try_clone().unwrap();
        let mut r = BufReader::new(stream);
        let mut line = String::new();
        w.write_all(b"garbage\n").unwrap();
        r.read_line(&mut line).unwrap();
        assert_eq!(line, "{\"ok\":false,\"error\":\"bad-request\"}\n");
        line.clear();
        w.write_all(b"{\"op\":\"stats\"}\n").unwrap();
        r.read_line(&mut line).unwrap();
        assert_eq!(line, "{\"ok\":true,\"records\":0,\"users\":0}\n");
    }
}
