// Pull a mask forward in time with backward optical flow.

use maskvote::{compose_warp, warp, BinaryMask, FlowField};

fn show(mask: &BinaryMask) {
    let grid = mask.decode();
    for r in 0..grid.height() {
        let row: String = (0..grid.width())
            .map(|c| if grid.get(r, c) { '#' } else { '.' })
            .collect();
        println!("  {row}");
    }
}

pub fn run_example() -> anyhow::Result<()> {
    let (h, w) = (5, 8);
    let mask = BinaryMask::from_pixels(h, w, [(1, 1), (1, 2), (2, 1), (2, 2)])?;
    println!("frame t-2:");
    show(&mask);

    // The object moves one column right per frame; backward flow at pixel p
    // points to where p was in the previous frame.
    let step = FlowField::constant(h, w, -1.0, 0.0)?;
    let once = warp(&mask, &step)?;
    println!("warped to t-1:");
    show(&once);

    let twice = compose_warp(&mask, &[step.clone(), step])?;
    println!("warped to t:");
    show(&twice);
    let expected = BinaryMask::from_pixels(h, w, [(1, 3), (1, 4), (2, 3), (2, 4)])?;
    assert_eq!(twice, expected);

    // half-pixel flow: bilinear samples of exactly 0.5 count as foreground
    let half = warp(&mask, &FlowField::constant(h, w, -0.5, 0.0)?)?;
    println!(
        "half-pixel shift keeps {} of {} pixels",
        half.area(),
        mask.area()
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
