use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use pedflow_core::ca::{run_ensemble, CaConfig};
use pedflow_core::io::{snapshot_file_name, write_json, write_snapshot_file, Frame, PdeMetadata};
use pedflow_core::meso::{default_dt, integrate_meso, MesoState};
use pedflow_core::model::classify_hyperbolicity_map;
use pedflow_core::pde::{run_pde, Grid};
use pedflow_core::scenarios::{bin_to_grid, builtin_scenarios, compare, expand, find_builtin, ComparisonReport, Family, ScenarioSpec};
use pedflow_core::VelocityParams;

use crate::args::{CompareArgs, HypmapArgs, Overrides, RunArgs, Tier};
use crate::error::{CliError, CliResult};
use crate::manifest::{FrameInfo, FrameKind, RunManifest, SnapshotEntry, MANIFEST_NAME};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const CONFIG_NAME: &str = "config.json";
const REPORT_NAME: &str = "report.csv";
const PDE_METADATA_NAME: &str = "pde_run.json";

enum Input {
    Scenario(ScenarioSpec),
    Ca(CaConfig),
}

struct Source {
    input: Input,
    name: String,
    path: Option<String>,
}

fn builtin_names() -> String {
    builtin_scenarios().into_iter().map(|s| s.name).collect::<Vec<_>>().join(", ")
}

fn resolve(arg: &str) -> CliResult<Source> {
    if let Some(spec) = find_builtin(arg) {
        return Ok(Source {
            name: spec.name.clone(),
            input: Input::Scenario(spec),
            path: None,
        });
    }
    let path = Path::new(arg);
    if !path.is_file() {
        if path.extension().is_some_and(|e| e == "json") {
            return Err(CliError::io(
                format!("reading {arg}"),
                std::io::Error::from(std::io::ErrorKind::NotFound),
            ));
        }
        return Err(CliError::Usage(format!(
            "unknown scenario '{arg}'; built-in scenarios: {}",
            builtin_names()
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {arg}"), e))?;
    let stem = path.file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
    match serde_json::from_str::<ScenarioSpec>(&text) {
        Ok(spec) => Ok(Source {
            name: spec.name.clone(),
            input: Input::Scenario(spec),
            path: Some(arg.to_string()),
        }),
        Err(scenario_err) => match serde_json::from_str::<CaConfig>(&text) {
            Ok(cfg) => Ok(Source {
                name: stem,
                input: Input::Ca(cfg),
                path: Some(arg.to_string()),
            }),
            Err(_) => Err(CliError::Usage(format!(
                "{arg} is neither a scenario nor a CA config: {scenario_err}"
            ))),
        },
    }
}

fn apply_to_scenario(spec: &mut ScenarioSpec, o: &Overrides) -> CliResult<()> {
    if let Some(seed) = o.seed {
        spec.ca.seed = seed;
    }
    if let Some(runs) = o.mc_runs {
        spec.ca.mc_runs = runs;
    }
    if let Some(eps) = o.eps {
        spec.pde.eps = eps;
    }
    if let Some(dx) = o.dx {
        spec.set_dx(dx)?;
    }
    if let Some(t_end) = o.t_end {
        spec.set_t_end(t_end);
    }
    if let Some(times) = &o.snapshots {
        spec.snapshot_times = times.clone();
    }
    if o.literal_rates {
        spec.ca.literal_rates = true;
    }
    Ok(())
}

fn apply_to_ca(cfg: &mut CaConfig, o: &Overrides) -> CliResult<()> {
    if o.eps.is_some() || o.dx.is_some() {
        return Err(CliError::Usage("--eps and --dx need a scenario, not a CA config".into()));
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = o.mc_runs {
        cfg.mc_runs = runs;
    }
    if let Some(t_end) = o.t_end {
        cfg.t_end = t_end;
        cfg.snapshot_times.retain(|&t| t <= t_end);
    }
    if let Some(times) = &o.snapshots {
        cfg.snapshot_times = times.clone();
    }
    if o.literal_rates {
        cfg.literal_rates = true;
    }
    Ok(())
}

/// Create `dir`, clearing the files of an earlier complete run. Anything
/// else already there is left alone and rejected.
fn prepare_outdir(dir: &Path) -> CliResult<()> {
    let ctx = |what: &str| format!("{what} {}", dir.display());
    fs::create_dir_all(dir).map_err(|e| CliError::io(ctx("creating"), e))?;
    if dir.join(MANIFEST_NAME).is_file() {
        let old = RunManifest::load(dir)?;
        for f in old.files {
            let p = dir.join(&f);
            if p.is_file() && Path::new(&f).components().count() == 1 {
                fs::remove_file(&p).map_err(|e| CliError::io(format!("removing {}", p.display()), e))?;
            }
        }
    }
    let mut leftovers = fs::read_dir(dir).map_err(|e| CliError::io(ctx("listing"), e))?;
    if leftovers.next().is_some() {
        return Err(CliError::Usage(format!(
            "output directory {} is not empty and holds no complete run",
            dir.display()
        )));
    }
    Ok(())
}

/// Collects the files written into a run directory.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> CliResult<Self> {
        prepare_outdir(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn snapshots(&mut self, tier: &str, frame: Frame, cell_size: f64, times: &[f64], fields: &[pedflow_core::DensityField]) -> CliResult<Vec<SnapshotEntry>> {
        let mut out = Vec::with_capacity(times.len());
        for (i, (t, f)) in times.iter().zip(fields).enumerate() {
            let name = snapshot_file_name(tier, i);
            write_snapshot_file(&self.path(&name), frame, cell_size, f)?;
            out.push(SnapshotEntry { time: *t, file: name });
        }
        Ok(out)
    }

    fn finish(mut self, mut manifest: RunManifest) -> CliResult<()> {
        self.files.push(MANIFEST_NAME.to_string());
        manifest.files = self.files;
        manifest.save(&self.dir)
    }
}

fn effective_times(times: &[f64], t_end: f64) -> Vec<f64> {
    if times.is_empty() {
        vec![t_end]
    } else {
        times.to_vec()
    }
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut source = resolve(&args.scenario)?;
    match &mut source.input {
        Input::Scenario(spec) => apply_to_scenario(spec, &args.overrides)?,
        Input::Ca(cfg) => apply_to_ca(cfg, &args.overrides)?,
    }
    let tier = args.tier;
    let outdir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", tier.name(), source.name)));

    // validate everything before touching the output directory
    let expanded = match &source.input {
        Input::Scenario(spec) => Some(expand(spec)?),
        Input::Ca(cfg) => {
            cfg.validate()?;
            None
        }
    };
    let ca_cfg = match (&source.input, &expanded) {
        (Input::Ca(cfg), _) => cfg.clone(),
        (_, Some(ex)) => ex.ca.clone(),
        _ => unreachable!(),
    };
    if tier == Tier::Pde && expanded.is_none() {
        return Err(CliError::Usage("the PDE tier needs a scenario, not a CA config".into()));
    }

    let mut art = Artifacts::new(&outdir)?;
    match &source.input {
        Input::Scenario(spec) => write_json(&art.path(CONFIG_NAME), spec)?,
        Input::Ca(cfg) => write_json(&art.path(CONFIG_NAME), cfg)?,
    }

    let mut manifest = RunManifest {
        command: "run".into(),
        tier: Some(tier.name().into()),
        scenario: Some(source.name.clone()),
        config_path: source.path.clone(),
        outdir: outdir.display().to_string(),
        wall_time_s: 0.0,
        seeds: Vec::new(),
        mc_runs: None,
        frame: None,
        snapshots: Vec::new(),
        files: Vec::new(),
        version: VERSION.into(),
    };
    let lattice_frame = FrameInfo {
        kind: FrameKind::Lattice,
        length: ca_cfg.n as f64 * ca_cfg.h,
        cells: ca_cfg.n,
        cell_size: ca_cfg.h,
    };

    match tier {
        Tier::Ca => {
            let stats = run_ensemble(&ca_cfg)?;
            manifest.snapshots = art.snapshots("ca", Frame::Lattice, ca_cfg.h, &stats.times, &stats.means)?;
            manifest.seeds = vec![ca_cfg.seed];
            manifest.mc_runs = Some(ca_cfg.mc_runs);
            manifest.frame = Some(lattice_frame);
        }
        Tier::Meso => {
            let (state0, dt) = match &expanded {
                Some(ex) => (ex.meso.state0.clone(), ex.meso.dt),
                None => (
                    MesoState::new(ca_cfg.init.expected_occupation(ca_cfg.n)?, ca_cfg.h)?,
                    default_dt(ca_cfg.h, &ca_cfg.velocities),
                ),
            };
            let times = effective_times(&ca_cfg.snapshot_times, ca_cfg.t_end);
            let snaps = integrate_meso(&state0, &ca_cfg.velocities, ca_cfg.t_end, dt, &times)?;
            let fields: Vec<_> = snaps.into_iter().map(|s| s.field).collect();
            manifest.snapshots = art.snapshots("meso", Frame::Lattice, ca_cfg.h, &times, &fields)?;
            manifest.frame = Some(lattice_frame);
        }
        Tier::Pde => {
            let p = &expanded.as_ref().expect("checked above").pde;
            let times = effective_times(&p.snapshot_times, p.t_end);
            let run = run_pde(&p.grid, &p.state0, &p.params, &p.velocities, p.t_end, &times)?;
            manifest.snapshots = art.snapshots("pde", Frame::Grid, p.grid.dx(), &run.times, &run.snapshots)?;
            write_json(
                &art.path(PDE_METADATA_NAME),
                &PdeMetadata::new(&p.grid, &p.params, &p.velocities, &run),
            )?;
            manifest.frame = Some(FrameInfo {
                kind: FrameKind::Grid,
                length: p.grid.length(),
                cells: p.grid.cells(),
                cell_size: p.grid.dx(),
            });
            if let Some(d) = run.diagnostics.iter().find(|d| d.out_of_box) {
                eprintln!("warning: densities left [0,1] by t={} (see {PDE_METADATA_NAME})", d.time);
            }
        }
    }
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    let count = manifest.snapshots.len();
    art.finish(manifest)?;
    println!(
        "{} {}: {count} snapshots written to {}",
        tier.name(),
        source.name,
        outdir.display()
    );
    Ok(())
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

pub fn compare_runs(args: &CompareArgs) -> CliResult<()> {
    let started = Instant::now();
    let reference = RunManifest::load(&args.reference)?;
    let target = RunManifest::load(&args.pde)?;
    let (Some(rf), Some(tf)) = (reference.frame, target.frame) else {
        return Err(CliError::Usage("both directories must hold tier runs".into()));
    };
    if !same_length(rf.length, tf.length) {
        return Err(CliError::Usage(format!(
            "frame mismatch: reference covers {} m, PDE run covers {} m",
            rf.length, tf.length
        )));
    }
    if reference.times() != target.times() {
        return Err(CliError::Usage(format!(
            "snapshot mismatch: {:?} vs {:?}",
            reference.times(),
            target.times()
        )));
    }
    let grid = Grid::new(tf.length, tf.cells)?;
    let mut report = ComparisonReport::default();
    for (r, t) in reference.snapshots.iter().zip(&target.snapshots) {
        let a = pedflow_core::io::read_snapshot_file(&args.reference.join(&r.file))?;
        let b = pedflow_core::io::read_snapshot_file(&args.pde.join(&t.file))?;
        let binned = bin_to_grid(&a.field, rf.cell_size, &grid)?;
        report.entries.push(compare(r.time, &binned, &b.field, grid.dx())?);
    }

    let mut art = Artifacts::new(&args.out)?;
    let path = art.path(REPORT_NAME);
    let file = fs::File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    report
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    let manifest = RunManifest {
        command: "compare".into(),
        tier: None,
        scenario: reference.scenario.clone(),
        config_path: None,
        outdir: args.out.display().to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        seeds: reference.seeds.iter().chain(&target.seeds).copied().collect(),
        mc_runs: reference.mc_runs,
        frame: Some(tf),
        snapshots: report
            .entries
            .iter()
            .map(|e| SnapshotEntry {
                time: e.time,
                file: REPORT_NAME.into(),
            })
            .collect(),
        files: Vec::new(),
        version: VERSION.into(),
    };
    art.finish(manifest)?;
    for e in &report.entries {
        println!(
            "t={:<8} L1(rho+)={:.4e} L1(rho-)={:.4e}",
            e.time, e.plus.l1, e.minus.l1
        );
    }
    Ok(())
}

pub fn hypmap(args: &HypmapArgs) -> CliResult<()> {
    let v = match (args.a, args.c0) {
        (Some(a), _) => VelocityParams::slowdown(1.0, a)?,
        (None, Some(c0)) => VelocityParams::new(
            c0,
            args.c1.unwrap_or_default(),
            args.c2.unwrap_or_default(),
            args.c3.unwrap_or_default(),
        )?,
        (None, None) => return Err(CliError::Usage("give either --a or --c0 --c1 --c2 --c3".into())),
    };
    let map = classify_hyperbolicity_map(&v, args.resolution)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
    }
    let ctx = format!("writing {}", args.out.display());
    let file = fs::File::create(&args.out).map_err(|e| CliError::io(ctx.clone(), e))?;
    let mut w = BufWriter::new(file);
    map.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(ctx, e))?;
    println!(
        "{} of {} samples nonhyperbolic",
        map.count_nonhyperbolic(),
        args.resolution * args.resolution
    );
    Ok(())
}

pub fn list_scenarios() {
    for s in builtin_scenarios() {
        let family = match &s.family {
            Family::RedLight { .. } => "red-light",
            Family::FullyMixed { .. } => "fully-mixed",
            Family::Nonhyperbolic { .. } => "nonhyperbolic",
            Family::Custom { .. } => "custom",
        };
        let c = s.velocities.as_array();
        println!(
            "{:<18} {:<14} c=({}, {}, {}, {}) L={} N={} M={} eps={} t_end={}",
            s.name, family, c[0], c[1], c[2], c[3], s.length, s.ca.n, s.pde.m, s.pde.eps, s.t_end
        );
    }
}
