//! Test fixtures: synthetic images, manifests, and a scriptable
//! chat-completions stub server.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use image::{ImageBuffer, Rgb};
use serde_json::{json, Value};

/// Writes a `w`×`h` gradient image; the format follows the extension.
pub fn write_image(path: &Path, w: u32, h: u32) {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).unwrap();
    }
    let img = ImageBuffer::from_fn(w, h, |x, y| Rgb([(x * 255 / w.max(1)) as u8, (y * 255 / h.max(1)) as u8, 128]));
    img.save(path).unwrap();
}

pub fn write_manifest(path: &Path, image_root: &str, samples: Vec<Value>) -> PathBuf {
    let body = json!({ "image_root": image_root, "samples": samples });
    std::fs::write(path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path.to_path_buf()
}

/// `n` grounded samples `p000..` with their own 120×100 images and box (30,20,60,50).
pub fn grounded_pool(dir: &Path, n: usize) -> PathBuf {
    let samples = (0..n)
        .map(|i| {
            let image = format!("p{i:03}.jpg");
            write_image(&dir.join("images").join(&image), 120, 100);
            json!({
                "id": format!("p{i:03}"),
                "image": image,
                "question": format!("What is item {i}?"),
                "answers": [format!("widget {i}")],
                "bbox": {"x": 30, "y": 20, "w": 60, "h": 50},
            })
        })
        .collect();
    write_manifest(&dir.join("pool.json"), "images", samples)
}

/// Labeled benchmark with `count` samples per `(label, count)`, ids `{label}_{i:04}`.
pub fn labeled_benchmark(dir: &Path, counts: &[(&str, usize)]) -> PathBuf {
    let img = dir.join("images").join("bench.png");
    write_image(&img, 32, 24);
    let samples = counts
        .iter()
        .flat_map(|&(label, n)| {
            (0..n).map(move |i| {
                json!({
                    "id": format!("{label}_{i:04}"),
                    "image": "bench.png",
                    "question": format!("Question {label} {i}?"),
                    "answers": [],
                    "label": label,
                })
            })
        })
        .collect();
    write_manifest(&dir.join("bench.json"), "images", samples)
}

/// What the stub sees of one request.
#[derive(Debug, Clone)]
pub struct StubRequest {
    pub prompt: String,
    /// 0 for the first time this exact prompt arrives, then 1, 2, ...
    pub attempt: usize,
}

#[derive(Debug, Clone)]
pub enum StubReply {
    Ok(String),
    Status(u16, String),
    /// Close the connection without answering.
    Drop,
}

type Handler = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

/// Minimal HTTP/1.1 server answering chat-completions POSTs on 127.0.0.1.
pub struct StubServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(handler: impl Fn(&StubRequest) -> StubReply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let seen: Arc<Mutex<HashMap<String, usize>>> = Arc::default();
        let (h, s) = (hits.clone(), stop.clone());
        let thread = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if s.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let (handler, seen, h) = (handler.clone(), seen.clone(), h.clone());
                std::thread::spawn(move || serve(conn, &*handler, &seen, &h));
            }
        });
        StubServer { url: format!("http://{addr}/v1/chat/completions"), hits, stop, addr, thread: Some(thread) }
    }

    /// Requests received so far, retries included.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(mut conn: TcpStream, handler: &Handler, seen: &Mutex<HashMap<String, usize>>, hits: &AtomicUsize) {
    let mut reader = BufReader::new(conn.try_clone().unwrap());
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    hits.fetch_add(1, Ordering::SeqCst);
    let prompt = serde_json::from_slice::<Value>(&body)
        .ok()
        .and_then(|v| v["messages"][0]["content"][0]["text"].as_str().map(str::to_string))
        .unwrap_or_default();
    let attempt = {
        let mut seen = seen.lock().unwrap();
        let n = seen.entry(prompt.clone()).or_insert(0);
        *n += 1;
        *n - 1
    };
    let (status, text) = match handler(&StubRequest { prompt, attempt }) {
        StubReply::Ok(content) => {
            (200, json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
        }
        StubReply::Status(code, text) => (code, text),
        StubReply::Drop => return,
    };
    let _ = write!(
        conn,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
    let _ = conn.flush();
}
