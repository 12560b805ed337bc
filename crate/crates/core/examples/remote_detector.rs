//! Talking to a detector service over `POST /detect`.
//!
//! A throwaway in-process server stands in for the real service and answers
//! every request with one square covering the top-left quarter of the image.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

use tagmap::detection::{polygon_area_px, DetectorBackend, ImageInput, RemoteBackend};

fn serve_one(listener: TcpListener) {
    let (stream, _) = listener.accept().expect("connection");
    let mut reader = BufReader::new(stream.try_clone().expect("clone"));
    let mut length = 0;
    let mut line = String::new();
    while reader.read_line(&mut line).expect("header") > 2 {
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            length = v.trim().parse().expect("length");
        }
        line.clear();
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).expect("body");
    let req: serde_json::Value = serde_json::from_slice(&body).expect("json");
    let (w, h) = (req["width"].as_f64().unwrap_or(0.0) / 2.0, req["height"].as_f64().unwrap_or(0.0) / 2.0);
    let reply = serde_json::json!({
        "image_id": "service-side", "detector_id": "maskrcnn-stub",
        "regions": [{"polygon": [[0, 0], [w, 0], [w, h], [0, h]], "confidence": 0.87}]
    })
    .to_string();
    let mut out = stream;
    write!(out, "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{reply}", reply.len())
        .expect("reply");
}

pub fn run() -> tagmap::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let url = format!("http://{}", listener.local_addr().expect("addr"));
    let server = std::thread::spawn(move || serve_one(listener));

    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("wall.png");
    image::RgbImage::from_pixel(64, 48, image::Rgb([180, 40, 40])).save(&path).expect("png");
    let input = ImageInput { image_id: "pt_090".into(), path: Some(path), width_px: 64, height_px: 48 };

    let set = RemoteBackend::new(&url).detect(&input)?;
    server.join().expect("server thread");
    println!("{} from {}: {} region(s)", set.image_id, set.detector_id, set.regions.len());
    for r in &set.regions {
        println!("  area {} px², confidence {}", polygon_area_px(&r.polygon_px), r.confidence);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
