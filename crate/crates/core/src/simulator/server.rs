//! Serves a synthetic world over the JSON count protocol.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};

use crate::audience::{CountBackend, CountRequest, WireError};
use crate::error::{Error, Result};

use super::SyntheticWorld;

/// A running server; dropping it without [`ServerHandle::shutdown`] leaves the
/// thread running until process exit.
pub struct ServerHandle {
    server: Arc<Server>,
    addr: SocketAddr,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// URL of the count endpoint.
    pub fn count_url(&self) -> String {
        format!("http://{}/count", self.addr)
    }

    pub fn shutdown(mut self) {
        self.server.unblock();
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

/// Binds `addr` (use port 0 for an ephemeral port) and answers
/// `POST /count` and `GET /health` on a background thread.
pub fn serve(world: Arc<SyntheticWorld>, addr: &str) -> Result<ServerHandle> {
    let server = Server::http(addr).map_err(|e| Error::Transport(e.to_string()))?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| Error::Transport("server is not bound to an IP socket".into()))?;
    let server = Arc::new(server);
    let worker = Arc::clone(&server);
    let thread = std::thread::spawn(move || {
        for mut request in worker.incoming_requests() {
            let (status, body) = match (request.method(), request.url()) {
                (Method::Get, "/health") => (200, r#"{"status":"ok"}"#.to_string()),
                (Method::Post, "/count") => {
                    let mut text = String::new();
                    match request.as_reader().read_to_string(&mut text) {
                        Ok(_) => answer(&world, &text),
                        Err(e) => (400, WireError::from(&Error::InvalidArgument(e.to_string())).to_json()),
                    }
                }
                _ => (
                    404,
                    WireError::from(&Error::InvalidArgument("no such route".into())).to_json(),
                ),
            };
            let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
            let _ = request.respond(
                Response::from_string(body)
                    .with_status_code(status)
                    .with_header(header),
            );
        }
    });
    Ok(ServerHandle {
        server,
        addr: bound,
        thread: Some(thread),
    })
}

fn answer(world: &SyntheticWorld, text: &str) -> (u16, String) {
    let result = serde_json::from_str::<CountRequest>(text)
        .map_err(|e| Error::InvalidArgument(format!("malformed count request: {e}")))
        .and_then(|request| world.count(&request));
    match result {
        Ok(response) => (200, serde_json::to_string(&response).expect("serializable")),
        Err(err) => (400, WireError::from(&err).to_json()),
    }
}
