//! Command-line front end. Every command stages its files in a temporary
//! directory beside `--out` and only moves them into place on success.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{config_hash, emit_config, parse_config, ConfigIssue, ScenarioConfig};
use crate::link::{dispersion_table_csv, loss_table_csv, plan_compensation};
use crate::optimizer::{sweep_skr, SweepSpec};
use crate::presets::preset;
use crate::scenario::{key_table_csv, wavelength_grid, KeyMode, Scenario};
use crate::security::{chsh_s, correlation_e, sample_bell_counts, BellSettings, CHSH_SETTINGS};
use crate::simulate::simulate;
use crate::source::{lobe_fwhm_nm, peak_wavelength, spdc_spectrum, usable_span_nm};
use crate::timetag::{histogram, histogram_csv, write_stream};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "wdmqkd", version, about = "Multiplexed entanglement QKD link analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled scenario: 201km, 301km or 404km.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Key-rate mode.
    #[arg(long, global = true, value_parser = ["finite", "asymptotic"])]
    pub mode: Option<String>,
    /// Comma-separated channel subset, e.g. C48,C50L92.
    #[arg(long, global = true, value_delimiter = ',')]
    pub channels: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emission spectra around the degeneracy temperature.
    Spectrum,
    /// Channel plan.
    Channels,
    /// Loss table.
    Budget,
    /// Dispersion table, timing uncertainty and compensation plan.
    Dispersion,
    /// Monte Carlo timetags, coincidences and peak fits.
    Simulate {
        /// Also write the raw timetag streams.
        #[arg(long)]
        timetags: bool,
    },
    /// Key analysis table.
    Keyrate,
    /// Pair-rate / gate-width sweep.
    Optimize,
    /// CHSH value.
    Bell,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Channels => "channels",
            Command::Budget => "budget",
            Command::Dispersion => "dispersion",
            Command::Simulate { .. } => "simulate",
            Command::Keyrate => "keyrate",
            Command::Optimize => "optimize",
            Command::Bell => "bell",
        }
    }
}

/// Reproducible run record; contains no timestamps or absolute paths.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Files produced by one command, relative to the output directory.
struct Staging {
    dir: tempfile::TempDir,
    files: Vec<String>,
}

impl Staging {
    fn new(out: &Path) -> Result<Self> {
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let dir = tempfile::Builder::new().prefix(".wdmqkd-").tempdir_in(&parent).map_err(|e| Error::io(&parent, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.dir.path().join(rel);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))
    }

    fn json(&mut self, rel: &str, v: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Moves every staged file into `out`, replacing files of the same name.
    fn commit(self, out: &Path) -> Result<()> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        for rel in &self.files {
            let (from, to) = (self.dir.path().join(rel), out.join(rel));
            if let Some(d) = to.parent() {
                fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        Ok(())
    }
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config(&text)
        }
        (None, Some(name)) => preset(name).map_err(|e| match e {
            Error::Config(_) => e,
            other => usage("--preset", other),
        }),
        (None, None) => Err(usage("--config", "one of --config or --preset is required")),
    }
}

fn usage(flag: &str, message: impl ToString) -> Error {
    Error::Config(vec![ConfigIssue { path: flag.into(), message: message.to_string() }])
}

/// Parses `args` and runs the command; returns the process exit code
/// (0 success, 1 invalid input, 2 runtime failure).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

/// Runs one command and returns its human-readable summary.
pub fn run(cli: &Cli) -> Result<String> {
    let mut cfg = load(&cli.common)?;
    if let Some(seed) = cli.common.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(mode) = &cli.common.mode {
        cfg.analysis.mode = mode.clone();
    }
    let mode: KeyMode = cfg.analysis.mode.parse()?;
    if cfg.simulation.seed > i64::MAX as u64 {
        return Err(usage("--seed", "must be at most 2^63 - 1"));
    }
    let mut scenario = Scenario::from_config(&cfg)?
        .with_channels(&cli.common.channels)
        .map_err(|e| usage("--channels", e))?;
    // Record the effective selection so the embedded config replays the run.
    if !cli.common.channels.is_empty() {
        cfg.channels.pairs = scenario.plan.pairs.iter().map(|p| p.label.clone()).collect();
        scenario.config = cfg.clone();
    }
    let mut stage = Staging::new(&cli.common.out)?;
    let (summary, text) = match &cli.command {
        Command::Spectrum => spectrum(&scenario, &mut stage)?,
        Command::Channels => channels(&scenario, &mut stage)?,
        Command::Budget => budget(&scenario, &mut stage)?,
        Command::Dispersion => dispersion(&scenario, &mut stage)?,
        Command::Simulate { timetags } => simulate_cmd(&scenario, *timetags, &mut stage)?,
        Command::Keyrate => keyrate(&scenario, mode, &mut stage)?,
        Command::Optimize => optimize(&scenario, &mut stage)?,
        Command::Bell => bell(&scenario, &mut stage)?,
    };
    stage.write("config.cfg", emit_config(&cfg)?)?;
    let mut files = stage.files.clone();
    files.push("report.json".into());
    let report = RunReport {
        tool: "wdmqkd",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().into(),
        scenario: cfg.name.clone(),
        config_hash: config_hash(&cfg)?,
        seed: cfg.simulation.seed,
        files,
        summary,
    };
    stage.json("report.json", &report)?;
    stage.commit(&cli.common.out)?;
    Ok(text)
}

type Outcome = (Value, String);

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

fn spectrum(s: &Scenario, stage: &mut Staging) -> Result<Outcome> {
    let src = &s.source;
    let ch = &s.config.channels;
    let grid = wavelength_grid(ch.wl_min_nm, ch.wl_max_nm, ch.wl_step_nm);
    let td = src.waveguide.degenerate_temperature_c;
    let temps: Vec<f64> = (1..=5).map(|k| td + k as f64).collect();
    let degenerate = 2.0 * src.pump_wavelength_nm;
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for &t in &temps {
        let sp = spdc_spectrum(src.pump_wavelength_nm, t, &src.waveguide, &grid)?;
        rows.push(json!({
            "temperature_c": t,
            "peak_nm": peak_wavelength(src.pump_wavelength_nm, t, &src.waveguide)?,
            "lobe_fwhm_nm": lobe_fwhm_nm(&sp, degenerate),
            "span_nm": usable_span_nm(&sp, ch.threshold),
        }));
        curves.push(sp);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["wavelength_nm".to_string()];
    header.extend(temps.iter().map(|t| format!("T={t:.1}C")));
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for (i, wl) in grid.iter().enumerate() {
        let mut rec = vec![format!("{wl:.3}")];
        rec.extend(curves.iter().map(|c| format!("{:.6}", c[i].relative_intensity)));
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    stage.write("spectrum.csv", w.into_inner().map_err(|e| Error::Format(e.to_string()))?)?;
    let mut text = String::from("temperature  peak (nm)  lobe FWHM (nm)  span (nm)\n");
    for r in &rows {
        text += &format!(
            "{:>9.1}C  {:>9.2}  {:>14}  {:>9.1}\n",
            r["temperature_c"].as_f64().unwrap_or(0.0),
            r["peak_nm"].as_f64().unwrap_or(0.0),
            r["lobe_fwhm_nm"].as_f64().map_or("-".into(), |v| format!("{v:.1}")),
            r["span_nm"].as_f64().unwrap_or(0.0),
        );
    }
    Ok((json!({ "curves": rows }), text))
}

fn channels(s: &Scenario, stage: &mut Staging) -> Result<Outcome> {
    stage.write("channels.json", s.plan.to_json() + "\n")?;
    let mut text = format!("{} channel pairs at {} GHz\n", s.plan.pairs.len(), s.plan.grid_spacing_ghz);
    for p in &s.plan.pairs {
        text += &format!("{}  {:.3} nm / {:.3} nm\n", p.label, p.signal_nm(), p.idler_nm());
    }
    Ok((json!({ "pairs": s.plan.pairs.len() }), text))
}

fn budget(s: &Scenario, stage: &mut Staging) -> Result<Outcome> {
    let b = s.loss_budget();
    stage.write("loss_table.csv", loss_table_csv(&[(s.config.name.clone(), b.clone())])?)?;
    stage.json("budget.json", &b)?;
    let mut text = String::new();
    for (item, v) in &b.items {
        text += &format!("{item:<24} {v:>6.1} dB\n");
    }
    text += &format!("{:<24} {:>6.1} dB\n", "Total", b.total_db);
    Ok((to_value(&b)?, text))
}

fn dispersion(s: &Scenario, stage: &mut Staging) -> Result<Outcome> {
    let rows = s.timing()?;
    stage.write("dispersion_table.csv", dispersion_table_csv(&rows)?)?;
    let central = s.plan.central().ok_or_else(|| Error::domain("the channel plan is empty"))?;
    let plan = plan_compensation(&s.bare_link(), &s.catalog(), central, &s.plan, s.config.catalog.residual_threshold_ps);
    let fits = json!({ "dcm": s.dcm_fit, "dcf": s.dcf_fit });
    let per_channel: Vec<Value> = rows.iter().map(|(d, t)| json!({ "dispersion": d, "timing": t })).collect();
    stage.json("dispersion.json", &json!({ "channels": per_channel, "fits": fits, "plan": plan }))?;
    let mut text = String::from("channel    residual (ps)  dT (ps)\n");
    for (d, t) in &rows {
        text += &format!("{:<10} {:>13.1}  {:>7.1}\n", d.label, d.residual_ps, t.delta_t_ps);
    }
    text += &format!(
        "planner: {} DCM + {} DCF, residual {:.1} ps at {}\n",
        plan.counts[0], plan.counts[1], plan.target_residual_ps, central.label
    );
    Ok((json!({ "plan_counts": { "DCM": plan.counts[0], "DCF": plan.counts[1] } }), text))
}

fn simulate_cmd(s: &Scenario, timetags: bool, stage: &mut Staging) -> Result<Outcome> {
    let seed = s.config.simulation.seed;
    let (report, streams) = simulate(s, seed)?;
    let hash = config_hash(&s.config)?;
    let sc = &s.config.simulation;
    for (c, (a, b)) in report.channels.iter().zip(&streams) {
        let bins = histogram(a, b, sc.bin_width_ps, sc.span_ps, c.offset_ps)?;
        stage.write(&format!("histograms/{}.csv", c.label), histogram_csv(&bins)?)?;
        if timetags {
            let pa = stage.path(&format!("timetags/{}_a.bin", c.label))?;
            write_stream(&pa, a, seed, &hash)?;
            stage.files.push(format!("timetags/{}_a.bin.json", c.label));
            let pb = stage.path(&format!("timetags/{}_b.bin", c.label))?;
            write_stream(&pb, b, seed, &hash)?;
            stage.files.push(format!("timetags/{}_b.bin.json", c.label));
        }
    }
    stage.json("simulation.json", &report)?;
    let g = &report.aggregate;
    let mut text = "channel    raw      QBER sim / model   FWHM fit / model (ps)\n".to_string();
    for c in &report.channels {
        text += &format!(
            "{:<10} {:<8} {:>6} / {:>5.2}%   {:>6} / {:.1}\n",
            c.label,
            c.summary.raw,
            c.summary.qber_total.map_or("-".into(), |q| format!("{:.2}%", 100.0 * q)),
            c.predicted.qber.total_pp,
            c.fit_fwhm_ps.map_or("-".into(), |f| format!("{f:.1}")),
            c.predicted_fwhm_ps,
        );
    }
    text += &format!(
        "total: raw {} sifted {} ({:.4}), QBER {} vs model {:.2}%\n",
        g.raw,
        g.sifted,
        g.sifted_fraction,
        g.qber.map_or("-".into(), |q| format!("{:.2}%", 100.0 * q)),
        100.0 * g.predicted_qber
    );
    Ok((to_value(g)?, text))
}

fn keyrate(s: &Scenario, mode: KeyMode, stage: &mut Staging) -> Result<Outcome> {
    let r = s.key_report(mode)?;
    stage.write("key_table.csv", key_table_csv(&[(s.config.name.clone(), r.clone())])?)?;
    stage.json("keyrate.json", &r)?;
    let a = &r.aggregate;
    let text = format!(
        "{}: raw {} sifted {} QBER {:.2}%\nfinite {} bits ({:.3} bit/s, {:?} blocks)\nasymptotic {:.0} bits ({:.4} bit/s)\nmodel QBER {:.2}% = pol {:.2} + acc {:.2} + dark {:.2}\n",
        r.name,
        a.raw,
        a.sifted,
        100.0 * a.qber,
        a.finite_secure,
        a.finite_skr_bits_per_s,
        r.block_mode,
        a.asymptotic_secure,
        a.asymptotic_skr_bits_per_s,
        r.total_pp,
        r.e_pol_pp,
        r.e_acc_pp,
        r.e_dark_pp
    );
    Ok((to_value(&r.aggregate)?, text))
}

fn optimize(s: &Scenario, stage: &mut Staging) -> Result<Outcome> {
    let spec = SweepSpec::from_scenario(s)?;
    let r = sweep_skr(&spec)?;
    stage.write("surface.csv", r.surface_csv()?)?;
    let optimum = json!({ "objective": spec.objective, "argmax": r.argmax });
    stage.json("optimum.json", &optimum)?;
    let text = format!(
        "optimum ({}): {:.3e} pairs/s per channel, gate {} ps, SKR {:.4} bit/s, QBER {:.2}%\n",
        s.config.optimizer.objective,
        r.argmax.rate,
        r.argmax.width_ps,
        r.argmax.skr,
        100.0 * r.argmax.qber
    );
    Ok((optimum, text))
}

fn bell(s: &Scenario, stage: &mut Staging) -> Result<Outcome> {
    let b = &s.config.bell;
    let model = BellSettings::phi_plus(CHSH_SETTINGS, b.visibility);
    let mut e = [0.0; 4];
    for (i, (slot, target)) in e.iter_mut().zip(model.e).enumerate() {
        let counts = sample_bell_counts(target, b.pairs_per_setting, s.config.simulation.seed.wrapping_add(i as u64));
        *slot = correlation_e(&counts)?;
    }
    let sampled = BellSettings { angles: CHSH_SETTINGS, e };
    let out = json!({
        "visibility": b.visibility,
        "pairs_per_setting": b.pairs_per_setting,
        "model": { "e": model.e, "s": chsh_s(&model) },
        "sampled": { "e": sampled.e, "s": chsh_s(&sampled) },
    });
    stage.json("bell.json", &out)?;
    let text = format!("S = {:.4} (model), {:.4} (sampled, V = {})\n", chsh_s(&model), chsh_s(&sampled), b.visibility);
    Ok((out, text))
}
