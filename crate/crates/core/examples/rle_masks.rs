// Run-length masks: encode a pixel grid, inspect the counts, compare masks.

use maskvote::{iou, BinaryMask, Grid};

pub fn run_example() -> anyhow::Result<()> {
    // 3x4 frame, a 2x2 block in the top-left corner
    let block = Grid::from_fn(3, 4, |r, c| r < 2 && c < 2)?;
    let a = BinaryMask::encode(&block);
    // counts are column-major and start with a background run
    println!("block counts: {:?} (area {})", a.counts(), a.area());
    assert_eq!(a.counts(), &[0, 2, 1, 2, 7]);

    let b = BinaryMask::from_pixels(3, 4, [(0, 1), (1, 1), (0, 2), (1, 2)])?;
    let overlap = iou(&a, &b)?;
    println!("iou(a, b) = {overlap:.4}");
    assert!((overlap - 1.0 / 3.0).abs() < 1e-12);

    // counts from a file decode to the same mask
    let restored = BinaryMask::from_counts(3, 4, a.counts())?;
    assert_eq!(restored.decode(), block);

    let empty = BinaryMask::empty(3, 4)?;
    println!("iou(empty, empty) = {}", iou(&empty, &empty)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
