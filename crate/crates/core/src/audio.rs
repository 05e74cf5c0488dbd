//! WAV input/output and the in-memory sample buffer used by every other stage.
//!
//! Samples are kept as `f32` per channel and are never clamped while in memory.
//! Clamping only happens when exporting to 16-bit PCM.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unsupported/corrupt WAV {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },
    #[error("zero-length audio in {0}")]
    Empty(PathBuf),
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("invalid audio buffer: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// De-interleaved audio. All channels have the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    channels: Vec<Vec<f32>>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(AudioError::Invalid("at least one channel required".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(AudioError::Invalid("channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Frames per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f32] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f32>> {
        self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Outcome of a write. `clamped` is only ever set for 16-bit output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub clamped: bool,
    pub clamped_samples: usize,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let unsupported = |reason: String| AudioError::Unsupported {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader =
        WavReader::new(BufReader::new(file)).map_err(|e| unsupported(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || spec.sample_rate == 0 {
        return Err(unsupported("zero channels or sample rate".into()));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f32 / 8_388_608.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader.samples::<f32>().collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(unsupported(format!(
                "encoding {fmt:?} {bits}-bit (supported: PCM16, PCM24, float32)"
            )))
        }
    }
    .map_err(|e| unsupported(e.to_string()))?;

    if interleaved.is_empty() {
        return Err(AudioError::Empty(path.to_path_buf()));
    }
    if !interleaved.len().is_multiple_of(channels) {
        return Err(unsupported("sample count not a multiple of channel count".into()));
    }

    let frames = interleaved.len() / channels;
    let mut out = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &s) in out.iter_mut().zip(frame) {
            ch.push(s);
        }
    }
    AudioBuffer::new(out, spec.sample_rate)
}

/// Writes `buffer` atomically (temp file + rename) so readers never see a partial file.
pub fn write_wav(
    buffer: &AudioBuffer,
    path: impl AsRef<Path>,
    format: WavFormat,
) -> Result<WriteReport> {
    let path = path.as_ref();
    let fail = |reason: String| AudioError::Write {
        path: path.to_path_buf(),
        reason,
    };
    if buffer.is_empty() {
        return Err(fail("empty buffer".into()));
    }
    let channels = u16::try_from(buffer.num_channels()).map_err(|_| fail("too many channels".into()))?;
    let spec = match format {
        WavFormat::Pcm16 => WavSpec {
            channels,
            sample_rate: buffer.sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavFormat::Float32 => WavSpec {
            channels,
            sample_rate: buffer.sample_rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };

    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(e.to_string()))?;
    let mut report = WriteReport::default();
    {
        let mut writer = WavWriter::new(std::io::BufWriter::new(tmp.as_file()), spec)
            .map_err(|e| fail(e.to_string()))?;
        for i in 0..buffer.len() {
            for ch in &buffer.channels {
                let s = ch[i];
                match format {
                    WavFormat::Float32 => writer.write_sample(s),
                    WavFormat::Pcm16 => {
                        let clamped = s.clamp(-1.0, 1.0);
                        if clamped != s || s.is_nan() {
                            report.clamped_samples += 1;
                        }
                        let v = (clamped as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                        writer.write_sample(v)
                    }
                }
                .map_err(|e| fail(e.to_string()))?;
            }
        }
        writer.finalize().map_err(|e| fail(e.to_string()))?;
    }
    tmp.persist(path).map_err(|e| fail(e.to_string()))?;
    report.clamped = report.clamped_samples > 0;
    Ok(report)
}

/// Averages all channels into one.
pub fn downmix_mono(buffer: &AudioBuffer) -> AudioBuffer {
    if buffer.num_channels() == 1 {
        return buffer.clone();
    }
    let n = buffer.num_channels() as f64;
    let mixed = (0..buffer.len())
        .map(|i| (buffer.channels.iter().map(|c| c[i] as f64).sum::<f64>() / n) as f32)
        .collect();
    AudioBuffer {
        channels: vec![mixed],
        sample_rate: buffer.sample_rate,
    }
}
