mod args;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use cpocma_core::api::{
    assert_rate_parity, image_roundtrip, preset, run_ber_sweep, system_spectrum, theory_curve,
    throughput_per_hz, validate, ChannelModel, DeltaRule, ErrorCategory, Raster, SimConfig,
    SimError, SystemKind, ValidatedConfig, VERSION,
};
use serde::Serialize;

use args::{ChannelArg, Cli, Command, Common, RuleArg};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e
                .downcast_ref::<SimError>()
                .is_some_and(|s| s.category == ErrorCategory::Numeric);
            ExitCode::from(if numeric { 2 } else { 1 })
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, SimError> {
    let bad = |why: &str| SimError::config("eb_n0", format!("`{text}`: {why}"));
    let num = |s: &str| -> Result<f64, SimError> {
        match s.trim() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            v => v.parse::<f64>().map_err(|_| bad("not a number")),
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, s) = (num(start)?, num(stop)?, num(step)?);
            if !(s > 0.0 && a.is_finite() && b.is_finite() && b >= a) {
                return Err(bad("range needs start <= stop and a positive step"));
            }
            let count = ((b - a) / s + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|k| a + k as f64 * s).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(bad("use a list `0,2,4` or a range `start:stop:step`")),
    }
}

fn build_config(c: &Common) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| SimError::config("config", format!("{}: {e}", path.display())))?;
            SimConfig::from_toml(&text)?
        }
        None => preset(c.preset.as_deref().unwrap_or("awgn"))?,
    };
    if let Some(s) = &c.system {
        cfg.system = s.parse()?;
    }
    if let Some(n) = c.num_subcarriers {
        cfg.carrier.num_subcarriers = n;
        cfg.carrier.base_freqs = None;
    }
    if let Some(f) = c.f {
        cfg.carrier.f = f;
        cfg.carrier.base_freqs = None;
    }
    if let Some(fs) = c.sample_rate {
        cfg.carrier.sample_rate = fs;
    }
    if let Some(ch) = c.channel {
        cfg.channel.model = match ch {
            ChannelArg::Awgn => ChannelModel::Awgn,
            ChannelArg::ThreeRay => ChannelModel::ThreeRay,
        };
    }
    if let Some(g) = &c.eb_n0 {
        cfg.channel.eb_n0_db = parse_grid(g)?;
    }
    if let Some(r) = c.decision {
        cfg.decision = match r {
            RuleArg::Literal => DeltaRule::Literal,
            RuleArg::Anchored => DeltaRule::Anchored,
        };
    }
    let run = &mut cfg.run;
    if let Some(v) = c.seed {
        run.seed = v;
    }
    if let Some(v) = c.min_bits {
        run.min_bits = v;
    }
    if let Some(v) = c.max_bits {
        run.max_bits = v;
    }
    if let Some(v) = c.target_errors {
        run.target_errors = v;
    }
    if let Some(v) = c.frame_symbols {
        run.frame_symbols = v;
    }
    Ok(cfg)
}

/// CSV sink: a version comment line, then the header and rows.
struct Table {
    writer: csv::Writer<Box<dyn Write>>,
}

impl Table {
    fn open(path: Option<&Path>, header: &[&str]) -> Result<Self> {
        let mut sink: Box<dyn Write> = match path {
            Some(p) => Box::new(io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        };
        writeln!(sink, "# cpocma {VERSION}")?;
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    version: &'a str,
    command: &'a str,
    config: &'a SimConfig,
    results: T,
}

fn write_summary<T: Serialize>(
    path: Option<&Path>,
    command: &str,
    v: &ValidatedConfig,
    results: T,
) -> Result<()> {
    if let Some(p) = path {
        let s = Summary {
            version: VERSION,
            command,
            config: &v.config,
            results,
        };
        fs::write(p, serde_json::to_string_pretty(&s)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let v = validate(build_config(common)?)?;
    let out = common.out.as_deref();
    let summary = common.summary.as_deref();
    let grid = v.grid().to_vec();
    let run_params = v.config.run;
    let n = v.setup.num_users().to_string();
    match cmd {
        Command::Ber(_) | Command::Compare(_) => {
            let systems = if matches!(cmd, Command::Compare(_)) {
                let s = vec![SystemKind::Cpocma, SystemKind::Fdma, SystemKind::Cdma];
                assert_rate_parity(&v.setup, &s)?;
                for sys in &s {
                    v.setup.check(*sys)?;
                }
                s
            } else {
                vec![v.system()]
            };
            let mut t = Table::open(
                out,
                &[
                    "system",
                    "N",
                    "eb_n0_db",
                    "total_bits",
                    "bit_errors",
                    "ber",
                    "low_confidence",
                    "seed",
                ],
            )?;
            let mut all = Vec::new();
            for sys in systems {
                let pts = run_ber_sweep(sys, &v.setup, &v.taps, &grid, &run_params)?;
                for p in &pts {
                    t.row(&[
                        sys.to_string(),
                        n.clone(),
                        p.eb_n0_db.to_string(),
                        p.total_bits.to_string(),
                        p.bit_errors.to_string(),
                        p.ber.to_string(),
                        p.low_confidence.to_string(),
                        p.seed.to_string(),
                    ])?;
                }
                all.extend(pts);
            }
            t.finish()?;
            write_summary(summary, cmd.name(), &v, &all)
        }
        Command::Theory(_) => {
            let pts = theory_curve(&v.setup, &grid, &v.config.theory)?;
            let mut t = Table::open(out, &["eb_n0_db", "sigma", "p_cpomf", "p_cpocf", "p_e"])?;
            for p in &pts {
                t.row(&[
                    p.eb_n0_db.to_string(),
                    p.sigma.to_string(),
                    p.p_cpomf.to_string(),
                    p.p_cpocf.to_string(),
                    p.p_e.to_string(),
                ])?;
            }
            t.finish()?;
            write_summary(summary, "theory", &v, &pts)
        }
        Command::Spectrum { fraction, .. } => {
            let s = system_spectrum(v.system(), &v.setup, *fraction, run_params.seed)?;
            let f = v.setup.carrier.f();
            eprintln!(
                "{} N={n}: occupied bandwidth {:.6e} Hz ({:.3} f) at {:.1}% power",
                v.system(),
                s.occupied_bandwidth,
                s.occupied_bandwidth / f,
                100.0 * s.fraction
            );
            let mut t = Table::open(out, &["freq_hz", "psd"])?;
            for (fr, p) in s.freqs.iter().zip(&s.psd) {
                t.row(&[fr.to_string(), p.to_string()])?;
            }
            t.finish()?;
            #[derive(Serialize)]
            struct Band {
                system: SystemKind,
                fraction: f64,
                occupied_bandwidth_hz: f64,
                occupied_bandwidth_over_f: f64,
                low_edge_hz: f64,
                high_edge_hz: f64,
                peak_freq_hz: f64,
            }
            write_summary(
                summary,
                "spectrum",
                &v,
                Band {
                    system: v.system(),
                    fraction: s.fraction,
                    occupied_bandwidth_hz: s.occupied_bandwidth,
                    occupied_bandwidth_over_f: s.occupied_bandwidth / f,
                    low_edge_hz: s.low_edge,
                    high_edge_hz: s.high_edge,
                    peak_freq_hz: s.peak_freq,
                },
            )
        }
        Command::Throughput(_) => {
            let pts = throughput_per_hz(v.system(), &v.setup, &v.taps, &grid, &run_params)?;
            let mut t = Table::open(
                out,
                &[
                    "system",
                    "N",
                    "eb_n0_db",
                    "throughput",
                    "bandwidth_hz",
                    "theta",
                    "total_bits",
                    "bit_errors",
                    "low_confidence",
                ],
            )?;
            for p in &pts {
                t.row(&[
                    p.system.to_string(),
                    n.clone(),
                    p.eb_n0_db.to_string(),
                    p.throughput.to_string(),
                    p.bandwidth.to_string(),
                    p.theta.to_string(),
                    p.ber.total_bits.to_string(),
                    p.ber.bit_errors.to_string(),
                    p.ber.low_confidence.to_string(),
                ])?;
            }
            t.finish()?;
            write_summary(summary, "throughput", &v, &pts)
        }
        Command::Image { input, decoded, .. } => {
            let img = match input {
                Some(p) => {
                    let bytes = fs::read(p)
                        .map_err(|e| SimError::config("input", format!("{}: {e}", p.display())))?;
                    Raster::from_pnm(&bytes)?
                }
                None => Raster::test_pattern(64, 64),
            };
            let mut t = Table::open(
                out,
                &[
                    "system",
                    "N",
                    "eb_n0_db",
                    "psnr_db",
                    "total_bits",
                    "bit_errors",
                ],
            )?;
            #[derive(Serialize)]
            struct Row {
                eb_n0_db: f64,
                psnr_db: f64,
                total_bits: u64,
                bit_errors: u64,
            }
            let mut rows = Vec::new();
            for &db in &grid {
                let o = image_roundtrip(
                    &img,
                    v.system(),
                    &v.setup,
                    &v.channel_at(db),
                    run_params.frame_symbols,
                    run_params.seed,
                )?;
                t.row(&[
                    v.system().to_string(),
                    n.clone(),
                    db.to_string(),
                    o.psnr.to_string(),
                    o.total_bits.to_string(),
                    o.bit_errors.to_string(),
                ])?;
                if let Some(path) = decoded {
                    let target = decoded_path(path, db, grid.len() > 1);
                    fs::write(&target, o.decoded.to_pnm())
                        .with_context(|| format!("writing {}", target.display()))?;
                }
                rows.push(Row {
                    eb_n0_db: db,
                    psnr_db: o.psnr,
                    total_bits: o.total_bits,
                    bit_errors: o.bit_errors,
                });
            }
            t.finish()?;
            write_summary(summary, "image", &v, &rows)
        }
    }
}

fn decoded_path(path: &Path, db: f64, per_point: bool) -> std::path::PathBuf {
    if !per_point {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("decoded");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("pnm");
    path.with_file_name(format!("{stem}_{db}dB.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::parse_grid;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:14:2").unwrap().len(), 8);
        assert_eq!(parse_grid("1,3.5").unwrap(), vec![1.0, 3.5]);
        assert_eq!(parse_grid("inf").unwrap(), vec![f64::INFINITY]);
        assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 11);
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("4:0:1").is_err());
    }
}
