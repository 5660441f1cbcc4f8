//! Shared helpers for integration tests: a minimal single-threaded HTTP
//! server good enough to stand in for the gradient and reconstruction
//! services, plus fixture-file helpers.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

/// Serve `handler(body) -> (status_line, response_body)` on a random local
/// port until the process exits. Returns the base URL.
pub fn spawn_http_server<F>(handler: F) -> String
where
    F: Fn(&[u8]) -> (String, Vec<u8>) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            // read headers
            let header_end = loop {
                match stream.read(&mut chunk) {
                    Ok(0) => break None,
                    Ok(n) => {
                        buf.extend_from_slice(&chunk[..n]);
                        if let Some(pos) = find_header_end(&buf) {
                            break Some(pos);
                        }
                    }
                    Err(_) => break None,
                }
            };
            let Some(header_end) = header_end else { continue };
            let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
            let content_length = headers
                .lines()
                .find_map(|l| {
                    let (k, v) = l.split_once(':')?;
                    k.eq_ignore_ascii_case("content-length")
                        .then(|| v.trim().parse::<usize>().ok())?
                })
                .unwrap_or(0);
            let body_start = header_end + 4;
            while buf.len() < body_start + content_length {
                match stream.read(&mut chunk) {
                    Ok(0) => break,
                    Ok(n) => buf.extend_from_slice(&chunk[..n]),
                    Err(_) => break,
                }
            }
            let body = &buf[body_start..(body_start + content_length).min(buf.len())];
            let (status, response) = handler(body);
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                response.len()
            );
            let _ = stream.write_all(&response);
        }
    });
    format!("http://{addr}")
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

/// Gradient-echo service: for each point in the unfrozen range, returns
/// `2/|range| * (p - nearest(target, p))` with a brute-force nearest lookup.
/// This mirrors the first Chamfer term's gradient at lambda = 1 and shares
/// no code with the library.
pub fn spawn_echo_gradient_server(target: Vec<[f64; 3]>) -> String {
    spawn_http_server(move |body| {
        let req: serde_json::Value = match serde_json::from_slice(body) {
            Ok(v) => v,
            Err(e) => return ("400 Bad Request".into(), format!("{{\"error\":\"{e}\"}}").into_bytes()),
        };
        let points: Vec<[f64; 3]> = serde_json::from_value(req["points"].clone()).unwrap();
        let start = req["unfrozen_range"][0].as_u64().unwrap() as usize;
        let end = req["unfrozen_range"][1].as_u64().unwrap() as usize;
        let n = (end - start) as f64;
        let mut grads = Vec::with_capacity(end - start);
        let mut value = 0.0;
        for p in &points[start..end] {
            let mut best = [0.0; 3];
            let mut best_d = f64::INFINITY;
            for q in &target {
                let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = *q;
                }
            }
            value += best_d / n;
            grads.push([
                2.0 / n * (p[0] - best[0]),
                2.0 / n * (p[1] - best[1]),
                2.0 / n * (p[2] - best[2]),
            ]);
        }
        let response = serde_json::json!({ "grads": grads, "value": value });
        ("200 OK".into(), serde_json::to_vec(&response).unwrap())
    })
}

/// Write a mesh fixture as an OBJ file and return its path.
pub fn write_obj(dir: &Path, name: &str, mesh: &sketch3d::Mesh) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, sketch3d::mesh::to_obj_string(mesh)).unwrap();
    path
}
