//! Example features as 8-bit grayscale images.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

/// Row-major 8-bit grid; features outside `[0, 1]` are clamped.
pub fn to_gray(features: &[f64]) -> Vec<u8> {
    features.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn encode_png(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(width * height, gray.len(), "image size");
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().expect("in-memory PNG header");
    writer.write_image_data(gray).expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG");
    out
}

pub fn png_base64(width: usize, height: usize, gray: &[u8]) -> String {
    STANDARD.encode(encode_png(width, height, gray))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_levels() {
        assert_eq!(to_gray(&[0.0, 0.5, 1.0, 1.2, -0.1]), vec![0, 128, 255, 255, 0]);
    }

    #[test]
    fn png_decodes_to_the_same_pixels() {
        let gray: Vec<u8> = (0..12).map(|v| v * 20).collect();
        let bytes = encode_png(4, 3, &gray);
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (4, 3));
        assert_eq!(&buf[..info.buffer_size()], gray.as_slice());
        assert!(STANDARD.decode(png_base64(4, 3, &gray)).is_ok());
    }
}
