#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use cccl::store_io::save_store;
use cccl_core::inventory::{ConceptId, LanguageCode, Variant};
use cccl_core::{EmbeddingKey, EmbeddingStore, EmbeddingVector};
use serde_json::{json, Value};

pub const MOCK_MODEL: &str = "mock-clip";
pub const MOCK_DIM: usize = 8;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn cccl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cccl"))
        .args(args)
        .env_remove("EMBEDDER_URL")
        .output()
        .expect("run cccl")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Deterministic vector for a payload: FNV-1a over the bytes, expanded per
/// component.
pub fn mock_vector(payload: &str) -> Vec<f64> {
    (0..MOCK_DIM)
        .map(|i| {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ i as u64;
            for b in payload.bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
            let v = (h % 2001) as f64 / 1000.0 - 1.0;
            if i == 0 && v == 0.0 {
                0.5
            } else {
                v
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub enum Behaviour {
    Healthy,
    /// Serves this many embed requests, then answers 500 forever.
    FailAfter(usize),
    AlwaysError,
}

/// A one-endpoint-pair HTTP/1.1 server standing in for the embedder service.
pub struct MockProvider {
    pub url: String,
    pub embed_calls: Arc<AtomicUsize>,
    pub items_served: Arc<AtomicUsize>,
}

impl MockProvider {
    pub fn start(behaviour: Behaviour) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let embed_calls = Arc::new(AtomicUsize::new(0));
        let items_served = Arc::new(AtomicUsize::new(0));
        let (calls, items) = (embed_calls.clone(), items_served.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (calls, items) = (calls.clone(), items.clone());
                thread::spawn(move || serve(stream, behaviour, &calls, &items));
            }
        });
        Self {
            url,
            embed_calls,
            items_served,
        }
    }
}

/// A URL nothing listens on.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    url
}

fn serve(stream: TcpStream, behaviour: Behaviour, calls: &AtomicUsize, items: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut stream = stream;
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut length = 0usize;
    let mut chunked = false;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':').unwrap_or((line, ""));
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap_or(0),
            "transfer-encoding" => chunked = value.trim().eq_ignore_ascii_case("chunked"),
            _ => {}
        }
    }
    let body = if chunked {
        read_chunked(&mut reader)
    } else {
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        body
    };
    let (status, payload) = respond(&request_line, &body, behaviour, calls, items);
    let reason = if status == 200 { "OK" } else { "Error" };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

fn read_chunked(reader: &mut impl BufRead) -> Vec<u8> {
    let mut body = Vec::new();
    loop {
        let mut size = String::new();
        reader.read_line(&mut size).unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        let mut chunk = vec![0; n + 2];
        reader.read_exact(&mut chunk).unwrap();
        if n == 0 {
            return body;
        }
        body.extend_from_slice(&chunk[..n]);
    }
}

fn respond(
    request_line: &str,
    body: &[u8],
    behaviour: Behaviour,
    calls: &AtomicUsize,
    items: &AtomicUsize,
) -> (u16, String) {
    if matches!(behaviour, Behaviour::AlwaysError) {
        return (500, r#"{"error":"boom"}"#.into());
    }
    if request_line.starts_with("GET /health") {
        return (
            200,
            json!({"status": "ok", "model_id": MOCK_MODEL, "dim": MOCK_DIM}).to_string(),
        );
    }
    if !request_line.starts_with("POST /v1/embed") {
        return (404, r#"{"error":"not found"}"#.into());
    }
    let served = calls.fetch_add(1, Ordering::SeqCst);
    if let Behaviour::FailAfter(limit) = behaviour {
        if served >= limit {
            return (503, r#"{"error":"overloaded"}"#.into());
        }
    }
    let request: Value = match serde_json::from_slice(body) {
        Ok(v) => v,
        Err(e) => return (400, json!({"error": e.to_string()}).to_string()),
    };
    let vectors: Vec<Value> = request["items"]
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .map(|item| {
            json!({
                "key": item["key"],
                "vec": mock_vector(item["payload"].as_str().unwrap_or_default()),
            })
        })
        .collect();
    items.fetch_add(vectors.len(), Ordering::SeqCst);
    (
        200,
        json!({"model_id": MOCK_MODEL, "dim": MOCK_DIM, "vectors": vectors}).to_string(),
    )
}

/// Unit vector in the plane whose cosine with (1, 0) is `c`.
pub fn at_cosine(c: f64) -> Vec<f64> {
    vec![c, (1.0 - c * c).sqrt()]
}

pub const PLANTED_SLOPE: f64 = 1.5;
pub const PLANTED_INTERCEPT: f64 = 0.01;

/// Writes an inventory, corrections and stores for `concepts` corrections in
/// `ja` whose ΔX_c is exactly `1.5·ΔSEM + 0.01`, for every model in `models`.
pub struct PlantedWorkspace {
    pub dir: PathBuf,
    pub inventory: PathBuf,
    pub corrections: PathBuf,
    pub text_store: PathBuf,
    pub image_stores: Vec<(String, PathBuf)>,
    pub expected: Vec<(f64, f64)>,
}

pub fn planted_workspace(
    dir: &Path,
    concepts: usize,
    models: &[&str],
    images: u32,
) -> PlantedWorkspace {
    let en = LanguageCode::new("en").unwrap();
    let ja = LanguageCode::new("ja").unwrap();
    let mut inventory = String::from("# version: synth\nconcept\ten\tja\n");
    let mut corrections =
        String::from("concept\tlanguage\toriginal\tcorrected\terror_types\tnote\n");
    let mut text = EmbeddingStore::new("synthetic-text", Some(2)).unwrap();
    let mut stores: Vec<EmbeddingStore> = models
        .iter()
        .map(|_| EmbeddingStore::new("synthetic-image", Some(2)).unwrap())
        .collect();
    let mut expected = Vec::new();
    let tags = ["F", "C", "A", "T", "IS", "OS"];
    for i in 0..concepts {
        let id = ConceptId::new(format!("c{i:03}")).unwrap();
        inventory.push_str(&format!("{id}\tw{i}\torig{i}\n"));
        corrections.push_str(&format!(
            "{id}\tja\torig{i}\tcorr{i}\t{}\t\n",
            tags[i % tags.len()]
        ));
        let d = -0.1 + 0.2 * i as f64 / (concepts - 1).max(1) as f64;
        let (sem_o, sem_c) = (0.5, 0.5 + d);
        let (xc_o, xc_c) = (0.4, 0.4 + PLANTED_SLOPE * d + PLANTED_INTERCEPT);
        expected.push((sem_c - sem_o, xc_c - xc_o));
        let put = |store: &mut EmbeddingStore, key: EmbeddingKey, v: Vec<f64>| {
            store.put(key, EmbeddingVector::new(v).unwrap()).unwrap();
        };
        put(
            &mut text,
            EmbeddingKey::text(id.clone(), en.clone(), Variant::Original),
            vec![1.0, 0.0],
        );
        put(
            &mut text,
            EmbeddingKey::text(id.clone(), ja.clone(), Variant::Original),
            at_cosine(sem_o),
        );
        put(
            &mut text,
            EmbeddingKey::text(id.clone(), ja.clone(), Variant::Corrected),
            at_cosine(sem_c),
        );
        for store in &mut stores {
            for k in 0..images {
                let scale = f64::from(k + 1);
                put(
                    store,
                    EmbeddingKey::image(id.clone(), en.clone(), Variant::Original, k),
                    vec![scale, 0.0],
                );
                put(
                    store,
                    EmbeddingKey::image(id.clone(), ja.clone(), Variant::Original, k),
                    at_cosine(xc_o),
                );
                put(
                    store,
                    EmbeddingKey::image(id.clone(), ja.clone(), Variant::Corrected, k),
                    at_cosine(xc_c),
                );
            }
        }
    }
    std::fs::create_dir_all(dir).unwrap();
    let inventory_path = dir.join("inventory.tsv");
    let corrections_path = dir.join("corrections.tsv");
    let text_path = dir.join("text.jsonl");
    std::fs::write(&inventory_path, inventory).unwrap();
    std::fs::write(&corrections_path, corrections).unwrap();
    save_store(&text, &text_path).unwrap();
    let image_stores = models
        .iter()
        .zip(&stores)
        .map(|(m, store)| {
            let path = dir.join(format!("images_{m}.jsonl"));
            save_store(store, &path).unwrap();
            ((*m).to_owned(), path)
        })
        .collect();
    PlantedWorkspace {
        dir: dir.to_owned(),
        inventory: inventory_path,
        corrections: corrections_path,
        text_store: text_path,
        image_stores,
        expected,
    }
}

impl PlantedWorkspace {
    /// Global flags pointing the CLI at this workspace.
    pub fn args(&self) -> Vec<String> {
        let mut args = vec![
            "--inventory".into(),
            self.inventory.display().to_string(),
            "--corrections".into(),
            self.corrections.display().to_string(),
            "--text-store".into(),
            self.text_store.display().to_string(),
            "--out".into(),
            self.dir.join("out").display().to_string(),
        ];
        for (m, p) in &self.image_stores {
            args.push("--model".into());
            args.push(format!("{m}={}", p.display()));
        }
        args
    }

    pub fn run_dir(&self) -> PathBuf {
        self.dir.join("out").join("default")
    }
}
