//! File interface: mono WAV (16-bit PCM or 32-bit float) and raw f32 LE.

use std::io::{Read, Write};
use std::path::Path;

use super::ModemError;

pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), ModemError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}

/// Reads a mono WAV file, scaling integer PCM into [-1, 1].
pub fn read_wav(path: &Path, expected_rate: u32) -> Result<Vec<f32>, ModemError> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(ModemError::Format(format!(
            "expected mono, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != expected_rate {
        return Err(ModemError::Format(format!(
            "expected {expected_rate} Hz, got {} Hz",
            spec.sample_rate
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => Ok(r.samples::<f32>().collect::<Result<_, _>>()?),
        (hound::SampleFormat::Int, 16) => Ok(r
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()?),
        (fmt, bits) => Err(ModemError::Format(format!(
            "unsupported sample format {fmt:?}/{bits}"
        ))),
    }
}

pub fn write_raw_f32<W: Write>(mut out: W, samples: &[f32]) -> std::io::Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
    out.write_all(&bytes)
}

pub fn read_raw_f32<R: Read>(mut input: R) -> Result<Vec<f32>, ModemError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(ModemError::Format(
            "raw stream length is not a multiple of 4".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{decode, encode, DecodeOutcome, FrameKind, ModemProfile, OobFrame};

    #[test]
    fn wav_round_trip_keeps_frame() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let p = ModemProfile::default();
        let f = OobFrame::new(FrameKind::NetworkInit, (0..30).collect()).unwrap();
        let pcm = encode(&p, &f).unwrap();
        write_wav(&path, &pcm, p.sample_rate).unwrap();
        let back = read_wav(&path, p.sample_rate).unwrap();
        assert_eq!(back.len(), pcm.len());
        assert_eq!(decode(&p, &back).unwrap(), DecodeOutcome::Frame(f));
    }

    #[test]
    fn float_wav_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 48_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for s in [0.25f32, -0.5, 1.0] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(read_wav(&path, 48_000).unwrap(), vec![0.25, -0.5, 1.0]);
        assert!(matches!(
            read_wav(&path, 44_100),
            Err(ModemError::Format(_))
        ));
    }

    #[test]
    fn raw_round_trip() {
        let s = vec![0.5f32, -0.125, 0.0];
        let mut buf = Vec::new();
        write_raw_f32(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 12);
        assert_eq!(read_raw_f32(&buf[..]).unwrap(), s);
        assert!(read_raw_f32(&buf[..5]).is_err());
    }
}
