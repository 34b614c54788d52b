//! IDX image files: write a small labelled set, parse it back, and binarize
//! the sevens the grid benchmark uses in place of its synthetic glyphs.
//!
//! cargo run --example idx_glyphs [images.idx labels.idx]

use dropsembles::data::{
    binarize, encode_idx_images, encode_idx_labels, load_idx_images, seven_glyphs,
    BINARIZE_THRESHOLD,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (images, labels): (std::path::PathBuf, std::path::PathBuf) = match &args[..] {
        [i, l] => (i.into(), l.into()),
        _ => {
            let dir = std::env::temp_dir().join("dropsembles-idx-example");
            std::fs::create_dir_all(&dir)?;
            let glyphs = seven_glyphs(6, 11);
            let (i, l) = (dir.join("images.idx"), dir.join("labels.idx"));
            std::fs::write(&i, encode_idx_images(&glyphs)?)?;
            std::fs::write(&l, encode_idx_labels(&vec![7; glyphs.len()]))?;
            (i, l)
        }
    };
    let set = load_idx_images(&images, &labels)?;
    println!("{} images", set.len());
    if let Some((img, label)) = set.iter().find(|(_, l)| *l == 7) {
        println!("first seven (label {label}):");
        let mask = binarize(img, BINARIZE_THRESHOLD);
        let (h, w) = mask.dims();
        for r in 0..h {
            let line: String = (0..w)
                .map(|c| if *mask.get(r, c) { '#' } else { '.' })
                .collect();
            println!("  {line}");
        }
    }
    Ok(())
}
