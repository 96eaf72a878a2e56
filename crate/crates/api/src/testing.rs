//! An in-process server on an ephemeral port, for integration tests.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tokio::sync::oneshot;

use facmon_core::Facilities;

use crate::config::DEFAULT_MAX_UPLOAD_BYTES;
use crate::routes::AppState;
use crate::server::serve_on;

pub struct TestServer {
    pub addr: SocketAddr,
    pub svc: Arc<Facilities>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start(svc: Arc<Facilities>) -> TestServer {
        TestServer::with_upload_limit(svc, DEFAULT_MAX_UPLOAD_BYTES)
    }

    pub fn with_upload_limit(svc: Arc<Facilities>, max_upload_bytes: usize) -> TestServer {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let state = AppState {
            svc: svc.clone(),
            max_upload_bytes,
        };
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .expect("runtime");
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
                addr_tx.send(listener.local_addr().expect("addr")).expect("report addr");
                serve_on(listener, state, async {
                    let _ = stop_rx.await;
                })
                .await
                .expect("serve");
            });
        });
        let addr = addr_rx.recv().expect("server failed to start");
        TestServer {
            addr,
            svc,
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}
