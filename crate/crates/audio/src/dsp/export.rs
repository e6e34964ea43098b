use std::io::Write;

use cxverb_core::{CxTensor, Tensor};

use crate::error::{Error, Result};

/// Lower end of the exported dynamic range, in dB relative to the peak.
pub const DB_FLOOR: f64 = -120.0;

/// Magnitude in dB relative to the spectrogram's peak, clamped to
/// `[DB_FLOOR, 0]`, shaped `(T, F)`.
pub fn magnitude_db(s: &CxTensor<f64>) -> Result<Tensor<f64>> {
    let d = s.dims();
    if d.len() < 2 || s.numel() != d[d.len() - 2] * d[d.len() - 1] {
        return Err(Error::Shape(format!("expected a single (T, F) plane, got {d:?}")));
    }
    let mag = s.magnitude().re().data().to_vec();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let db = mag
        .iter()
        .map(|&m| if peak > 0.0 && m > 0.0 { (20.0 * (m / peak).log10()).clamp(DB_FLOOR, 0.0) } else { DB_FLOOR })
        .collect();
    Ok(Tensor::from_vec([d[d.len() - 2], d[d.len() - 1]], db)?)
}

/// One row per frame, one column per bin, values in dB.
pub fn write_spectrogram_csv<W: Write>(mut w: W, db: &Tensor<f64>) -> std::io::Result<()> {
    let bins = db.dims()[1];
    for row in db.data().chunks_exact(bins) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Binary 8-bit greyscale image: time runs left to right, frequency bottom
/// to top, `DB_FLOOR` maps to black and 0 dB to white.
pub fn write_spectrogram_pgm<W: Write>(mut w: W, db: &Tensor<f64>) -> std::io::Result<()> {
    let (frames, bins) = (db.dims()[0], db.dims()[1]);
    write!(w, "P5\n{frames} {bins}\n255\n")?;
    let mut pixels = Vec::with_capacity(frames * bins);
    for f in (0..bins).rev() {
        for t in 0..frames {
            let v = (db.data()[t * bins + f] - DB_FLOOR) / -DB_FLOOR;
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    w.write_all(&pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_is_relative_to_peak() {
        let s = CxTensor::from_vecs([1, 1, 1, 3], vec![1.0, 0.1, 0.0], vec![0.0; 3]).unwrap();
        let db = magnitude_db(&s).unwrap();
        assert_eq!(db.dims(), &[1, 3]);
        assert!((db.data()[0]).abs() < 1e-12);
        assert!((db.data()[1] + 20.0).abs() < 1e-9);
        assert_eq!(db.data()[2], DB_FLOOR);
    }

    #[test]
    fn pgm_layout() {
        let db = Tensor::from_vec([2, 3], vec![0.0, -60.0, -120.0, -120.0, -120.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_spectrogram_pgm(&mut buf, &db).unwrap();
        let header = b"P5\n2 3\n255\n";
        assert_eq!(&buf[..header.len()], header);
        // top row is the highest bin
        assert_eq!(&buf[header.len()..], &[0, 255, 128, 0, 255, 0]);
    }

    #[test]
    fn csv_has_one_row_per_frame() {
        let db = Tensor::from_vec([2, 2], vec![0.0, -1.5, -2.0, -3.0]).unwrap();
        let mut buf = Vec::new();
        write_spectrogram_csv(&mut buf, &db).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0.000,-1.500\n-2.000,-3.000\n");
    }
}
