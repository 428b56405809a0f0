//! IDX container (the MNIST distribution format): big-endian header,
//! unsigned byte payload.

use std::fs;
use std::path::Path;

use super::Item;
use crate::error::{Error, Result};
use crate::Tensor;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Returns `(count, rows, cols, payload)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "image payload truncated: {} of {need} bytes",
            payload.len()
        )));
    }
    Ok((n, rows, cols, &payload[..need]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(Error::Format(format!(
            "label payload truncated: {} of {n} bytes",
            payload.len()
        )));
    }
    Ok(&payload[..n])
}

/// Reads an image/label IDX pair into items with pixels scaled by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<Item>> {
    let img_bytes = fs::read(images_path)?;
    let lab_bytes = fs::read(labels_path)?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lab_bytes)?;
    if labels.len() != n {
        return Err(Error::Format(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    let per = rows * cols;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let data = pixels[i * per..(i + 1) * per]
                .iter()
                .map(|&b| f64::from(b) / 255.0)
                .collect();
            let t = Tensor::matrix(rows, cols, data).expect("IDX extent arithmetic");
            Item::new(i as u32, t, usize::from(l))
        })
        .collect())
}

/// Writes images (rounded to bytes) and labels as an IDX pair.
pub fn write_idx(images_path: &Path, labels_path: &Path, items: &[Item]) -> Result<()> {
    let (rows, cols) = match items.first().map(|it| it.pixels.shape()) {
        Some([r, c]) => (*r, *c),
        Some(_) => return Err(Error::Data("IDX export needs 2-D images".into())),
        None => (0, 0),
    };
    let n = u32::try_from(items.len()).map_err(|_| Error::Data("too many items".into()))?;
    let mut img = Vec::with_capacity(16 + items.len() * rows * cols);
    img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&n.to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut lab = Vec::with_capacity(8 + items.len());
    lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    for it in items {
        if it.pixels.shape() != [rows, cols] {
            return Err(Error::Data("IDX export needs equally sized images".into()));
        }
        img.extend(
            it.pixels
                .data()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        let l = u8::try_from(it.ground_truth())
            .map_err(|_| Error::Data("IDX labels must fit in a byte".into()))?;
        lab.push(l);
    }
    fs::write(images_path, img)?;
    fs::write(labels_path, lab)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn two_images_of_28x28() {
        let mut bytes = header(IDX_IMAGE_MAGIC, &[2, 28, 28]);
        assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        bytes.extend(std::iter::repeat_n(7u8, 1568));
        let (n, r, c, payload) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, r, c, payload.len()), (2, 28, 28, 1568));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = header(IDX_IMAGE_MAGIC, &[2, 28, 28]);
        bytes.extend(std::iter::repeat_n(0u8, 1567));
        assert!(matches!(parse_idx_images(&bytes), Err(Error::Format(_))));
        let mut lab = header(IDX_LABEL_MAGIC, &[3]);
        lab.extend([1u8, 2]);
        assert!(matches!(parse_idx_labels(&lab), Err(Error::Format(_))));
    }

    #[test]
    fn image_magic_rejected_as_labels() {
        let mut bytes = header(IDX_IMAGE_MAGIC, &[1]);
        bytes.push(0);
        assert!(matches!(parse_idx_labels(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn load_scales_and_checks_counts() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        let mut img = header(IDX_IMAGE_MAGIC, &[2, 1, 2]);
        img.extend([255u8, 0, 0, 255]);
        let mut lab = header(IDX_LABEL_MAGIC, &[2]);
        lab.extend([3u8, 9]);
        fs::write(&ip, &img).unwrap();
        fs::write(&lp, &lab).unwrap();
        let items = load_idx(&ip, &lp).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].pixels.data(), &[1.0, 0.0]);
        assert_eq!(items[1].pixels.data(), &[0.0, 1.0]);
        assert_eq!(items[1].ground_truth(), 9);

        let mut lab3 = header(IDX_LABEL_MAGIC, &[3]);
        lab3.extend([1u8, 2, 3]);
        fs::write(&lp, &lab3).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format(_))));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        let items = vec![
            Item::new(0, Tensor::matrix(2, 2, vec![0.0, 1.0, 0.2, 0.6]).unwrap(), 4),
            Item::new(1, Tensor::matrix(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap(), 1),
        ];
        write_idx(&ip, &lp, &items).unwrap();
        let back = load_idx(&ip, &lp).unwrap();
        assert_eq!(back[0].pixels.data()[2], 51.0 / 255.0);
        assert_eq!(back[1].pixels, items[1].pixels);
        assert_eq!(back[0].ground_truth(), 4);
    }
}
