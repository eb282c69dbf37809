//! PNG patches, tensor dumps and atomic file output.

use std::io::Write;
use std::path::Path;

use super::patch::{NormalizedTensor, Patch};
use crate::error::{Error, Result};

pub fn read_png(path: &Path) -> Result<Patch> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let rgb = img.to_rgb8();
    Patch::new(rgb.width() as usize, rgb.height() as usize, rgb.into_raw())
}

pub fn encode_png(patch: &Patch) -> Vec<u8> {
    let mut buf = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut buf);
    image::ImageEncoder::write_image(
        encoder,
        patch.data(),
        patch.width() as u32,
        patch.height() as u32,
        image::ExtendedColorType::Rgb8,
    )
    .expect("in-memory PNG encoding cannot fail for a valid patch");
    buf
}

pub fn write_png(path: &Path, patch: &Patch) -> Result<()> {
    write_atomic(path, &encode_png(patch))
}

pub fn read_tensor(path: &Path) -> Result<NormalizedTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    NormalizedTensor::from_bytes(&bytes)
}

pub fn write_tensor(path: &Path, tensor: &NormalizedTensor) -> Result<()> {
    write_atomic(path, &tensor.to_bytes())
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/patch.png");
        let patch = Patch::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 80, 7]);
        write_png(&p, &patch).unwrap();
        assert_eq!(read_png(&p).unwrap(), patch);
    }

    #[test]
    fn missing_png_is_io_error() {
        let err = read_png(Path::new("/definitely/not/here.png")).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.mtnt");
        let t = NormalizedTensor::new(3, 1, 1, vec![0.5, -1.0, 2.0]).unwrap();
        write_tensor(&p, &t).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), t);
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
