//! Frame stack container.
//!
//! A short ASCII header, one `key value` pair per line and terminated by a
//! line reading `end`, followed by the counts as little-endian `u32`,
//! frame after frame, row-major within a frame.
//!
//! ```text
//! FLSTACK 1
//! width 128
//! height 128
//! frames 328
//! seed 7
//! gate_step 2.44e-9
//! gate_width 2.44e-9
//! config_hash 3f1a…
//! delays 0 2.44e-9 …
//! end
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::detector::{FrameStack, ImageFrame};
use crate::error::{Error, Result};

const MAGIC: &str = "FLSTACK 1";

pub fn write_stack<W: Write>(mut w: W, stack: &FrameStack, config_hash: &str) -> Result<()> {
    if config_hash.chars().any(char::is_whitespace) {
        return Err(Error::Container("config hash must not contain whitespace".into()));
    }
    let delays: Vec<String> = stack.delays().iter().map(|d| format!("{d:e}")).collect();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "width {}", stack.width)?;
    writeln!(w, "height {}", stack.height)?;
    writeln!(w, "frames {}", stack.len())?;
    writeln!(w, "seed {}", stack.seed)?;
    writeln!(w, "gate_step {:e}", stack.gate_step().unwrap_or(0.0))?;
    writeln!(w, "gate_width {:e}", stack.gate_width)?;
    writeln!(w, "config_hash {}", if config_hash.is_empty() { "-" } else { config_hash })?;
    writeln!(w, "delays {}", delays.join(" "))?;
    writeln!(w, "end")?;
    let mut buf = Vec::with_capacity(stack.width * stack.height * 4);
    for f in &stack.frames {
        buf.clear();
        for c in &f.counts {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the stack and the stored config hash.
pub fn read_stack<R: Read>(r: R) -> Result<(FrameStack, String)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut next_line = |r: &mut BufReader<R>| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Container("unexpected end of header".into()));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };
    if next_line(&mut r)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let (mut width, mut height, mut frames, mut seed) = (None, None, None, None);
    let (mut gate_width, mut hash, mut delays) = (None, None, None);
    loop {
        let l = next_line(&mut r)?;
        if l == "end" {
            break;
        }
        let (key, value) = l.split_once(' ').unwrap_or((l.as_str(), ""));
        let bad = |what: &str| Error::Container(format!("bad {what}: {value}"));
        match key {
            "width" => width = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            "height" => height = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            "frames" => frames = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(key))?),
            "gate_width" => gate_width = Some(value.parse::<f64>().map_err(|_| bad(key))?),
            "gate_step" => {}
            "config_hash" => hash = Some(if value == "-" { String::new() } else { value.to_string() }),
            "delays" => {
                delays = Some(
                    value.split_whitespace().map(|d| d.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad(key))?,
                )
            }
            _ => return Err(Error::Container(format!("unknown header key `{key}`"))),
        }
    }
    let missing = |k: &str| Error::Container(format!("missing header key `{k}`"));
    let width = width.ok_or_else(|| missing("width"))?;
    let height = height.ok_or_else(|| missing("height"))?;
    let frames = frames.ok_or_else(|| missing("frames"))?;
    let delays = delays.ok_or_else(|| missing("delays"))?;
    if delays.len() != frames {
        return Err(Error::Container(format!("{} delays for {frames} frames", delays.len())));
    }
    let npix = width.checked_mul(height).ok_or_else(|| Error::Container("frame too large".into()))?;
    let mut bytes = vec![0u8; npix * 4];
    let mut out = Vec::with_capacity(frames);
    for &d in &delays {
        r.read_exact(&mut bytes).map_err(|_| Error::Container("truncated counts".into()))?;
        let counts = bytes.chunks_exact(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        out.push(ImageFrame::new(width, height, d, counts));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Container("trailing bytes after counts".into()));
    }
    let stack = FrameStack::new(
        width,
        height,
        gate_width.ok_or_else(|| missing("gate_width"))?,
        seed.ok_or_else(|| missing("seed"))?,
        out,
    )?;
    Ok((stack, hash.unwrap_or_default()))
}

pub fn save_stack(path: &Path, stack: &FrameStack, config_hash: &str) -> Result<()> {
    write_stack(BufWriter::new(File::create(path)?), stack, config_hash)
}

pub fn load_stack(path: &Path) -> Result<(FrameStack, String)> {
    read_stack(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stack(w: usize, h: usize, n: usize, step: f64, seed: u64, fill: u32) -> FrameStack {
        let frames = (0..n)
            .map(|k| {
                let counts = (0..w * h).map(|i| fill.wrapping_add((i * 31 + k * 7) as u32)).collect();
                ImageFrame::new(w, h, 1e-7 + k as f64 * step, counts)
            })
            .collect();
        FrameStack::new(w, h, 2.44e-9, seed, frames).unwrap()
    }

    #[test]
    fn header_is_readable_text() {
        let s = stack(3, 2, 2, 2.44e-9, 9, 0);
        let mut buf = Vec::new();
        write_stack(&mut buf, &s, "abc").unwrap();
        let text = String::from_utf8_lossy(&buf[..buf.len() - 48]);
        assert!(text.starts_with("FLSTACK 1\nwidth 3\nheight 2\nframes 2\nseed 9\n"));
        assert!(text.contains("config_hash abc\n"));
        assert!(text.ends_with("end\n"));
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let s = stack(4, 4, 3, 1e-9, 1, 5);
        let mut buf = Vec::new();
        write_stack(&mut buf, &s, "h").unwrap();
        assert!(read_stack(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_stack(extra.as_slice()).is_err());
        assert!(read_stack(&b"NOPE\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..12, h in 1usize..12, n in 0usize..6, seed in any::<u64>(),
                      fill in any::<u32>(), step in 1e-10f64..1e-8, hash in "[0-9a-f]{0,64}") {
            let s = stack(w, h, n, step, seed, fill);
            let mut buf = Vec::new();
            write_stack(&mut buf, &s, &hash).unwrap();
            let (back, h2) = read_stack(buf.as_slice()).unwrap();
            prop_assert_eq!(back, s);
            prop_assert_eq!(h2, hash);
        }
    }
}
