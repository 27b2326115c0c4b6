//! Text resource helpers shared by the loaders.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

/// Opens a text resource, decompressing transparently when the path ends in `.gz`.
pub fn open_text(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let is_gz = path.extension().is_some_and(|ext| ext == "gz");
    Ok(if is_gz {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Creates an output file, gzip-compressed when the path ends in `.gz`.
pub fn create_text(path: &Path) -> io::Result<Box<dyn Write>> {
    let file = BufWriter::new(File::create(path)?);
    let is_gz = path.extension().is_some_and(|ext| ext == "gz");
    Ok(if is_gz {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(file)
    })
}

/// Reads a whole resource as UTF-8 text.
pub fn read_to_string(path: &Path) -> io::Result<String> {
    let mut s = String::new();
    open_text(path)?.read_to_string(&mut s)?;
    Ok(s)
}

/// Line iterator decoding each byte as Latin-1, so stray non-UTF-8 bytes never fail a read.
pub fn latin1_lines<R: BufRead>(mut reader: R) -> impl Iterator<Item = io::Result<String>> {
    let mut buf = Vec::new();
    std::iter::from_fn(move || {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                while matches!(buf.last(), Some(b'\n' | b'\r')) {
                    buf.pop();
                }
                Some(Ok(buf.iter().map(|&b| b as char).collect()))
            }
            Err(e) => Some(Err(e)),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin1_decodes_every_byte() {
        let lines: Vec<String> = latin1_lines(&b"a\xe9\r\nb\n\nc"[..])
            .collect::<io::Result<_>>()
            .unwrap();
        assert_eq!(lines, vec!["a\u{e9}", "b", "", "c"]);
    }
}
