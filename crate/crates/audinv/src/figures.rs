//! Comparison figures: one column per clip, a waveform row above a spectrogram row.

use std::path::Path;

use anyhow::{ensure, Result};
use audinv_core::audio::{AudioClip, Spectrogram};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, Luma};

const CELL_W: u32 = 256;
const CELL_H: u32 = 96;
const GAP: u32 = 6;

fn draw_waveform(img: &mut GrayImage, x0: u32, y0: u32, clip: &AudioClip) {
    let s = clip.samples();
    let mid = (CELL_H / 2) as f32;
    for x in 0..CELL_W {
        let a = s.len() * x as usize / CELL_W as usize;
        let b = (s.len() * (x as usize + 1) / CELL_W as usize).max(a + 1).min(s.len());
        let (lo, hi) = s[a..b].iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        let top = (mid - hi * (mid - 1.0)).round().clamp(0.0, (CELL_H - 1) as f32) as u32;
        let bot = (mid - lo * (mid - 1.0)).round().clamp(0.0, (CELL_H - 1) as f32) as u32;
        for y in top..=bot {
            img.put_pixel(x0 + x, y0 + y, Luma([30]));
        }
    }
}

fn draw_spectrogram(img: &mut GrayImage, x0: u32, y0: u32, s: &Spectrogram, lo: f32, hi: f32) {
    let span = if hi > lo { hi - lo } else { 1.0 };
    for y in 0..CELL_H {
        // Low frequencies at the bottom.
        let bin = (s.bins() - 1) - (y as usize * s.bins() / CELL_H as usize).min(s.bins() - 1);
        for x in 0..CELL_W {
            let frame = (x as usize * s.frames() / CELL_W as usize).min(s.frames() - 1);
            let v = (s.get(bin, frame) - lo) / span;
            img.put_pixel(x0 + x, y0 + y, Luma([(255.0 * (1.0 - v.clamp(0.0, 1.0))) as u8]));
        }
    }
}

/// Render columns of (clip, spectrogram) pairs; spectrograms share one intensity scale.
pub fn comparison_image(columns: &[(&AudioClip, &Spectrogram)]) -> Result<GrayImage> {
    ensure!(!columns.is_empty(), "figure needs at least one column");
    let n = columns.len() as u32;
    let mut img = GrayImage::from_pixel(n * CELL_W + (n + 1) * GAP, 2 * CELL_H + 3 * GAP, Luma([255]));
    let (lo, hi) = columns
        .iter()
        .flat_map(|(_, s)| s.values().data().iter().copied())
        .fold((f32::MAX, f32::MIN), |(l, h), v| (l.min(v), h.max(v)));
    for (i, (clip, spec)) in columns.iter().enumerate() {
        let x0 = GAP + i as u32 * (CELL_W + GAP);
        draw_waveform(&mut img, x0, GAP, clip);
        draw_spectrogram(&mut img, x0, 2 * GAP + CELL_H, spec, lo, hi);
    }
    Ok(img)
}

pub fn save_comparison(path: &Path, columns: &[(&AudioClip, &Spectrogram)]) -> Result<()> {
    comparison_image(columns)?.save(path)?;
    Ok(())
}

/// Spectrogram as a binary PGM, low frequencies at the bottom, scaled to its own range.
pub fn save_spectrogram_pgm(path: &Path, s: &Spectrogram) -> Result<()> {
    let (lo, hi) = s.values().data().iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = GrayImage::from_fn(s.frames() as u32, s.bins() as u32, |x, y| {
        let v = (s.get(s.bins() - 1 - y as usize, x as usize) - lo) / span;
        Luma([(255.0 * v) as u8])
    });
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    PnmEncoder::new(file).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary)).write_image(
        img.as_raw(),
        img.width(),
        img.height(),
        ExtendedColorType::L8,
    )?;
    Ok(())
}
