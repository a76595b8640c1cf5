//! Unit-test helpers (compiled only for tests): a minimal one-shot HTTP
//! server so the ureq adapters can be exercised without external services.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener};

/// Serves `count` requests on an ephemeral port, answering each with
/// `200 OK` and the given JSON body, then shuts down. Returns the address.
pub(crate) fn serve_once(body: String, count: usize) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for _ in 0..count {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let mut buf = vec![0_u8; 65536];
            let mut read_total = 0;
            // Read until the blank line, then the declared body length.
            loop {
                let n = match stream.read(&mut buf[read_total..]) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => n,
                };
                read_total += n;
                let text = String::from_utf8_lossy(&buf[..read_total]);
                if let Some(head_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| {
                            let (k, v) = l.split_once(':')?;
                            k.eq_ignore_ascii_case("content-length")
                                .then(|| v.trim().parse::<usize>().ok())?
                        })
                        .unwrap_or(0);
                    if read_total >= head_end + 4 + content_length {
                        break;
                    }
                }
            }
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    addr
}
