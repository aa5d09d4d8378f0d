#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/golden_corpus.xml");
pub const PARTIAL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/partial_corpus.xml");
pub const EMPTY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/empty_corpus.xml");

pub fn conditor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conditor"))
        .args(args)
        .env_remove("CONDITOR_LOG")
        .output()
        .expect("run conditor")
}

pub fn build(corpus: &str, out: &Path, threads: usize) -> Output {
    conditor(&[
        "build",
        "--corpus",
        corpus,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        &threads.to_string(),
    ])
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A running `conditor serve` process, killed on drop.
pub struct Server {
    child: Child,
    pub addr: String,
}

impl Server {
    pub fn start(store: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_conditor"))
            .args(["serve", "--store", store.to_str().unwrap(), "--port", "0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on http://")
            .unwrap_or_else(|| panic!("unexpected server banner {line:?}"))
            .to_string();
        Server { child, addr }
    }

    pub fn attach(child: Child, addr: String) -> Server {
        Server { child, addr }
    }

    /// Plain HTTP/1.1 GET over a raw socket; returns (status, body).
    pub fn get(&self, target: &str) -> (u16, String) {
        let mut stream = TcpStream::connect(&self.addr).unwrap();
        write!(stream, "GET {target} HTTP/1.1\r\nHost: {}\r\nConnection: close\r\n\r\n", self.addr).unwrap();
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).unwrap();
        let raw = String::from_utf8(raw).unwrap();
        let (head, body) = raw.split_once("\r\n\r\n").expect("header terminator");
        let status = head.split(' ').nth(1).unwrap().parse().unwrap();
        let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
        (status, if chunked { dechunk(body) } else { body.to_string() })
    }
}

fn dechunk(mut body: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, rest) = body.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        body = &rest[n + 2..];
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn encode(q: &str) -> String {
    url::form_urlencoded::byte_serialize(q.as_bytes()).collect()
}

pub fn store_dir(out: &Path) -> PathBuf {
    out.join("store")
}
