//! Experiment drivers. Each writes its outputs under `<out_root>/<experiment>/`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use superrad::correlation::{default_bin_width, write_g2_csv, write_g2_csv_with};
use superrad::ensemble::{event_rate, trajectory_seed};
use superrad::operators::CAVITY_CHANNEL;
use superrad::semiclassical::{log_grid, pump_sweep, write_sweep_csv, SweepPoint, SWEEP_SCHEMA_VERSION};
use superrad::{
    build_model, classify, g2_histogram, g2_zero_from_states, run_ensemble, thermal_g2, write_records,
    EnsembleConfig, EnsembleResult, G2Estimate, OperatorSet,
};

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{CliError, CliResult};
use crate::manifest::{Manifest, OutputKind};
use crate::plots;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_COLUMNS: &str = "w_over_gc,bin_width,n_phot,g2_hist,g2_hist_err,g2_states,g2_states_err,rate,rate_err";
pub const PAIR_COLUMNS: &str = "w_over_gc,s,p,z2_minus_s2,flag";

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_root: PathBuf,
    pub threads: Option<usize>,
    pub plots: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// First data-producing failure, if any.
    pub error: Option<CliError>,
}

/// Monte Carlo summary at one pump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSummary {
    pub w_over_gc: f64,
    pub bin_width: f64,
    pub n_phot: usize,
    pub g2_hist: f64,
    pub g2_hist_err: f64,
    pub g2_states: f64,
    pub g2_states_err: f64,
    pub rate: f64,
    pub rate_err: f64,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    opts: &'a RunOptions,
    dir: PathBuf,
    manifest: Manifest,
    error: Option<CliError>,
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunOutcome> {
    let start = Instant::now();
    let dir = opts.out_root.join(cfg.experiment.name());
    fs::create_dir_all(&dir)?;
    let mut run = Run {
        cfg,
        opts,
        manifest: Manifest::new(cfg, opts.threads),
        dir,
        error: None,
    };
    run.emit("config.toml", OutputKind::Config, |w| Ok(w.write_all(cfg.to_toml().as_bytes())?))?;
    match cfg.experiment {
        ExperimentId::Fig3 => run.fig3(),
        ExperimentId::Fig4 => run.pair_sweeps("fig4"),
        ExperimentId::Sweep => run.sweeps("sweep"),
        ExperimentId::Fig5a | ExperimentId::Fig5b | ExperimentId::Fig5c => run.fig5(),
        ExperimentId::Custom => run.custom(),
    }
    if opts.plots {
        let report = plots::render(&run.dir, cfg.experiment, &run.manifest);
        for rel in report.written {
            run.record(&format!("plot {rel}"), |r| r.manifest.add(&r.dir, &rel, OutputKind::Plot));
        }
        for (rel, err) in report.failed {
            run.manifest.fail(format!("plot {rel}"), err);
        }
        for rel in report.missing {
            run.manifest.fail(format!("plot input {rel}"), "file missing");
        }
    }
    run.manifest.wall_time_s = start.elapsed().as_secs_f64();
    run.manifest.write(&run.dir)?;
    Ok(RunOutcome {
        dir: run.dir,
        manifest: run.manifest,
        error: run.error,
    })
}

impl Run<'_> {
    /// Runs a step; a failure is logged, listed in the manifest and kept as the
    /// run's error if it is the first.
    fn record<T>(&mut self, step: &str, f: impl FnOnce(&mut Self) -> CliResult<T>) -> Option<T> {
        match f(self) {
            Ok(v) => Some(v),
            Err(e) => {
                warn!("{step}: {e}");
                self.manifest.fail(step, &e);
                self.error.get_or_insert(e);
                None
            }
        }
    }

    fn emit(
        &mut self,
        rel: &str,
        kind: OutputKind,
        body: impl FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    ) -> CliResult<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(rel))?);
        body(&mut w)?;
        w.flush()?;
        drop(w);
        self.manifest.add(&self.dir, rel, kind)?;
        info!("wrote {}", self.dir.join(rel).display());
        Ok(())
    }

    fn simulate(&mut self, index: usize, w_over_gc: f64, moments: bool) -> CliResult<(OperatorSet, EnsembleResult)> {
        let cfg = self.cfg;
        let gc = cfg.gamma_c()?;
        let ops = build_model(cfg.model, &cfg.system.clone().with_pump(w_over_gc * gc))?;
        let e = &cfg.ensemble;
        let mut ec = EnsembleConfig::new(e.n_trajectories, e.duration, trajectory_seed(cfg.master_seed, index as u64))
            .with_burn_in(e.burn_in)
            .with_integrator(e.integrator);
        if moments {
            ec = ec.with_moments(&ops, e.sample_stride);
        }
        if let Some(t) = self.opts.threads {
            ec = ec.with_threads(t);
        }
        info!(
            "{}: w = {w_over_gc} Γc, {} trajectories × {}",
            cfg.experiment, e.n_trajectories, e.duration
        );
        let res = run_ensemble(&ops, &ec)?;
        fs::create_dir_all(self.dir.join("records"))?;
        let rel = format!("records/{}_w{w_over_gc}.jumps", cfg.experiment);
        self.emit(&rel, OutputKind::Records, |w| Ok(write_records(w, &res.records)?))?;
        Ok((ops, res))
    }

    fn bin_width(&self, w_over_gc: f64) -> CliResult<f64> {
        if let Some(bw) = self.cfg.estimator.bin_width {
            return Ok(bw);
        }
        let gc = self.cfg.gamma_c()?;
        let w = w_over_gc * gc;
        Ok(default_bin_width(classify(w, self.cfg.system.n_atoms, gc)?, w, gc))
    }

    fn histogram(&self, res: &EnsembleResult, bw: f64, n_lags: usize) -> CliResult<G2Estimate> {
        Ok(g2_histogram(&res.records, CAVITY_CHANNEL, bw, n_lags)?)
    }

    fn mc_point(&mut self, index: usize, w_over_gc: f64) -> CliResult<(PointSummary, G2Estimate)> {
        let (ops, res) = self.simulate(index, w_over_gc, true)?;
        let bw = self.bin_width(w_over_gc)?;
        let hist = self.histogram(&res, bw, self.cfg.estimator.n_lags)?;
        let states = g2_zero_from_states(&res, &ops)?;
        let rate = event_rate(&res, CAVITY_CHANNEL)?;
        let summary = PointSummary {
            w_over_gc,
            bin_width: bw,
            n_phot: hist.n_phot,
            g2_hist: hist.values[0],
            g2_hist_err: hist.std_errors[0],
            g2_states: states.value,
            g2_states_err: states.std_error,
            rate: rate.mean,
            rate_err: rate.std_error,
        };
        Ok((summary, hist))
    }

    fn write_summary(&mut self, rel: &str, rows: &[PointSummary]) {
        let cfg = self.cfg;
        self.record(rel, |r| {
            r.emit(rel, OutputKind::SummaryCsv, |w| {
                write_summary_csv(w, cfg, rows)?;
                Ok(())
            })
        });
    }

    fn fig3(&mut self) {
        let mut rows = Vec::new();
        for (i, &w) in self.cfg.pump_grid.iter().enumerate() {
            if let Some((row, _)) = self.record(&format!("monte carlo w = {w}"), |r| r.mc_point(i, w)) {
                rows.push(row);
            }
        }
        self.write_summary("fig3_mc.csv", &rows);
        self.sweeps("fig3_semiclassical");
    }

    fn fig5(&mut self) {
        let w = self.cfg.pump_grid[0];
        let thermal = self.cfg.experiment == ExperimentId::Fig5c;
        let rel = format!("{}_g2.csv", self.cfg.experiment);
        self.record(&rel.clone(), |r| {
            let (_, res) = r.simulate(0, w, false)?;
            let bw = r.bin_width(w)?;
            let est = r.histogram(&res, bw, r.cfg.estimator.n_lags)?;
            let pump = w * r.cfg.gamma_c()?;
            r.emit(&rel, OutputKind::G2Csv, |out| {
                if thermal {
                    write_g2_csv_with(out, &est, &[("thermal", &|tau| thermal_g2(tau, pump))])?;
                } else {
                    write_g2_csv(out, &est)?;
                }
                Ok(())
            })
        });
    }

    fn custom(&mut self) {
        let mut rows = Vec::new();
        for (i, &w) in self.cfg.pump_grid.clone().iter().enumerate() {
            let rel = format!("custom_w{w}_g2.csv");
            let point = self.record(&rel.clone(), |r| {
                let (row, est) = r.mc_point(i, w)?;
                r.emit(&rel, OutputKind::G2Csv, |out| Ok(write_g2_csv(out, &est)?))?;
                Ok(row)
            });
            rows.extend(point);
        }
        self.write_summary("custom_summary.csv", &rows);
    }

    fn sweep_points(&self, n: usize) -> CliResult<Vec<SweepPoint>> {
        let s = &self.cfg.sweep;
        let grid = log_grid(s.w_min_over_gc, s.w_max_over_n_gc * n as f64, s.points);
        Ok(pump_sweep(n, self.cfg.gamma_c()?, &grid)?)
    }

    fn sweeps(&mut self, prefix: &str) {
        for n in self.cfg.sweep.n_atoms.clone() {
            let rel = format!("{prefix}_N{n}.csv");
            self.record(&rel.clone(), |r| {
                let pts = r.sweep_points(n)?;
                r.emit(&rel, OutputKind::SweepCsv, |w| Ok(write_sweep_csv(w, n, &pts)?))
            });
        }
    }

    fn pair_sweeps(&mut self, prefix: &str) {
        for n in self.cfg.sweep.n_atoms.clone() {
            let rel = format!("{prefix}_N{n}.csv");
            self.record(&rel.clone(), |r| {
                let pts = r.sweep_points(n)?;
                r.emit(&rel, OutputKind::SweepCsv, |w| write_pair_csv(w, n, &pts))
            });
        }
    }
}

pub fn write_summary_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[PointSummary]) -> CliResult<()> {
    let e = &cfg.ensemble;
    writeln!(out, "# superrad monte carlo summary")?;
    writeln!(out, "# schema_version = {SUMMARY_SCHEMA_VERSION}")?;
    writeln!(out, "# model = {}", cfg.model)?;
    writeln!(out, "# n_atoms = {}", cfg.system.n_atoms)?;
    writeln!(out, "# n_trajectories = {}", e.n_trajectories)?;
    writeln!(out, "# duration = {:e}", e.duration)?;
    writeln!(out, "# burn_in = {:e}", e.burn_in)?;
    writeln!(out, "# error_bars = 1sigma")?;
    writeln!(out, "{SUMMARY_COLUMNS}")?;
    for r in rows {
        writeln!(
            out,
            "{:.10e},{:.10e},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            r.w_over_gc, r.bin_width, r.n_phot, r.g2_hist, r.g2_hist_err, r.g2_states, r.g2_states_err, r.rate, r.rate_err
        )?;
    }
    Ok(())
}

/// Writes `s`, `p` and the inversion-fluctuation correlation `z2 − s²`.
pub fn write_pair_csv<W: Write>(out: &mut W, n_atoms: usize, points: &[SweepPoint]) -> CliResult<()> {
    writeln!(out, "# superrad pair correlation sweep")?;
    writeln!(out, "# schema_version = {SWEEP_SCHEMA_VERSION}")?;
    writeln!(out, "# n_atoms = {n_atoms}")?;
    writeln!(out, "{PAIR_COLUMNS}")?;
    for pt in points {
        let c = &pt.corr;
        let flag = if c.below_threshold { "below_threshold" } else { "ok" };
        writeln!(
            out,
            "{:.10e},{:.10e},{:.10e},{:.10e},{flag}",
            pt.w_over_gc,
            c.s,
            c.p,
            c.z2 - c.s * c.s
        )?;
    }
    Ok(())
}

/// Output root: the flag, then `SUPERRAD_OUT`, then `./superrad-out`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("SUPERRAD_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("superrad-out"))
}
