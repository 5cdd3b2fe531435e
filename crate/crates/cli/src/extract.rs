//! `digitize` and `audio-features`: single-modality extraction to CSV.

use std::path::PathBuf;

use clap::Args;

use physid::ingest::{
    apply_audio_prior, band_peaks, digitize_chart, load_image, read_wav, resample_digitized,
    to_target_rate, wav_features, AudioPrior, AxisCalibration, DEFAULT_COLOR_TOLERANCE,
    TARGET_RATE,
};

use crate::error::{CliError, Result};
use crate::table::write_table;

#[derive(Debug, Args)]
pub struct DigitizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// `r,g,b` or `#rrggbb`.
    #[arg(long)]
    pub color: String,
    /// `left,right,top,bottom,t_left,t_right,y_bottom,y_top`: the plot box in
    /// pixels followed by the data values at its edges.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    pub calib: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_COLOR_TOLERANCE)]
    pub tolerance: f64,
    /// Resample onto `k / fps` instead of one row per pixel column.
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_color(s: &str) -> Result<[u8; 3]> {
    let bad = || CliError::Usage(format!("invalid color '{s}' (expected r,g,b or #rrggbb)"));
    if let Some(hex) = s.strip_prefix('#') {
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        return Ok([byte(0)?, byte(2)?, byte(4)?]);
    }
    let parts: Vec<u8> = s
        .split(',')
        .map(|p| p.trim().parse::<u8>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    parts.try_into().map_err(|_| bad())
}

pub fn run_digitize(a: &DigitizeArgs) -> Result<()> {
    let color = parse_color(&a.color)?;
    let c: [f64; 8] = a
        .calib
        .clone()
        .try_into()
        .map_err(|_| CliError::Usage("--calib needs exactly 8 numbers".into()))?;
    let calib = AxisCalibration::from_box([c[0], c[1], c[2], c[3]], [c[4], c[5], c[6], c[7]]);
    calib.validate()?;
    let img = load_image(&a.image)?;
    let points = digitize_chart(&img, color, a.tolerance, &calib)?;
    let (t, y) = match a.fps {
        Some(fps) => {
            let (grid, mut values) = resample_digitized(&[points], fps)?;
            (grid, values.remove(0))
        }
        None => points.into_iter().unzip(),
    };
    write_table(&a.out, &["t", "y"], &[&t, &y])?;
    println!("wrote {} points to {}", t.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct AudioArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// `low,high,alpha,beta`: adds the speed `(f - beta) / alpha` of the
    /// spectral peak inside the band. Repeatable.
    #[arg(long)]
    pub tone: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_tone(s: &str) -> Result<((f64, f64), AudioPrior)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid tone '{s}'")))?;
    match v[..] {
        [lo, hi, alpha, beta] => Ok(((lo, hi), AudioPrior { alpha, beta })),
        _ => Err(CliError::Usage(format!(
            "tone '{s}' needs low,high,alpha,beta"
        ))),
    }
}

pub fn run_audio(a: &AudioArgs) -> Result<()> {
    let tones: Vec<_> = a
        .tone
        .iter()
        .map(|s| parse_tone(s))
        .collect::<Result<_>>()?;
    let (samples, sr) = read_wav(&a.wav)?;
    let samples = to_target_rate(samples, sr)?;
    let f = wav_features(&samples, TARGET_RATE)?;
    let mut header = vec![
        "t".to_string(),
        "rms".into(),
        "centroid".into(),
        "peak".into(),
    ];
    let mut columns: Vec<Vec<f64>> = vec![
        f.times.clone(),
        f.rms.clone(),
        f.centroid.clone(),
        f.peak.clone(),
    ];
    if !tones.is_empty() {
        let bands: Vec<(f64, f64)> = tones.iter().map(|t| t.0).collect();
        let (_, peaks) = band_peaks(&samples, TARGET_RATE, &bands)?;
        for (k, (p, (_, prior))) in peaks.iter().zip(&tones).enumerate() {
            header.push(format!("speed{}", k + 1));
            columns.push(apply_audio_prior(p, *prior)?);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let cols: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    write_table(&a.out, &header, &cols)?;
    println!("wrote {} frames to {}", f.len(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors() {
        assert_eq!(parse_color("220,30,30").unwrap(), [220, 30, 30]);
        assert_eq!(parse_color("#1e1edc").unwrap(), [30, 30, 220]);
        for bad in ["", "red", "1,2", "1,2,300", "#12345", "#gg0000"] {
            assert!(parse_color(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn tones() {
        let (band, prior) = parse_tone("300,2500,100,300").unwrap();
        assert_eq!(band, (300.0, 2500.0));
        assert_eq!(
            prior,
            AudioPrior {
                alpha: 100.0,
                beta: 300.0
            }
        );
        assert!(parse_tone("1,2,3").is_err());
    }
}
