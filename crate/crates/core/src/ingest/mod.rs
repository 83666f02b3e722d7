//! On-disk formats: flow files, detection files, label maps.

mod detections;
mod flo;
mod pgm;

pub use detections::{
    parse_detections, read_detections, render_detections, write_detections, DEFAULT_SCORE_THRESHOLD,
};
pub use flo::{decode_flo, encode_flo, read_flo, read_flo_from, write_flo, write_flo_to, FLO_TAG};
pub use pgm::{decode_label_map, decode_pgm, encode_pgm, read_label_map, write_label_map};
