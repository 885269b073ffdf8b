//! A local chat-completions endpoint for offline tests and demos.
//!
//! The server answers every POST by handing the decoded request to a
//! responder closure and wrapping its text in the standard
//! `choices[0].message.content` shape.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::LlmRequest;

pub type Responder = dyn Fn(&LlmRequest) -> String + Send + Sync;

pub struct StubServer {
    pub url: String,
    requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(responder: impl Fn(&LlmRequest) -> String + Send + Sync + 'static) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let responder: Arc<Responder> = Arc::new(responder);
        let handle = {
            let requests = requests.clone();
            let stop = stop.clone();
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    requests.fetch_add(1, Ordering::SeqCst);
                    if let Err(e) = serve(stream, responder.as_ref()) {
                        log::warn!("stub server: {e}");
                    }
                }
            })
        };
        Ok(StubServer {
            url: format!("http://{addr}/v1/chat/completions"),
            requests,
            stop,
            addr,
            handle: Some(handle),
        })
    }

    /// HTTP requests received so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, responder: &Responder) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let (status, payload) = match serde_json::from_slice::<LlmRequest>(&body) {
        Ok(req) => {
            let content = responder(&req);
            let payload = serde_json::json!({
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]
            });
            ("200 OK", payload.to_string())
        }
        Err(e) => ("400 Bad Request", serde_json::json!({"error": e.to_string()}).to_string()),
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}
