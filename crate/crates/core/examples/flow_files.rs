// Write and read `.flo` optical-flow files.

use maskvote::ingest::{decode_flo, encode_flo, read_flo, write_flo};
use maskvote::FlowField;

pub fn run_example() -> anyhow::Result<()> {
    let (h, w) = (4, 6);
    let u: Vec<f32> = (0..h * w).map(|i| i as f32 * 0.25).collect();
    let v: Vec<f32> = (0..h * w).map(|i| -(i as f32)).collect();
    let flow = FlowField::new(h, w, u, v)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("000001.flo");
    write_flo(&flow, &path)?;
    let bytes = std::fs::read(&path)?;
    // 4-byte tag, width, height, then interleaved (u, v) per pixel
    println!("{} bytes for a {h}x{w} field", bytes.len());
    assert_eq!(bytes.len(), 12 + 8 * (h * w) as usize);

    let back = read_flo(&path)?;
    assert_eq!(back, flow);
    println!("flow at (1, 2) = {:?}", back.at(1, 2));

    let mut corrupt = encode_flo(&flow);
    corrupt[0] = b'X';
    match decode_flo(&corrupt) {
        Err(e) if e.is_format() => println!("rejected: {e}"),
        other => anyhow::bail!("corrupt tag accepted: {other:?}"),
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
