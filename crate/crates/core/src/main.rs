//! Command-line driver: spectrum scans, beat-spectrum profiles, the
//! pre-flight oracle suite, and the order-2 MC-vs-quadrature check.
//!
//! Exit codes: 0 success, 1 oracle/check failure, 2 configuration parse
//! error, 3 invariant violation in computed results (a bug trap).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cbs_antiloc::beatspec::{self, VelocityModel};
use cbs_antiloc::cbs::{self, DiagramSet};
use cbs_antiloc::config::{config_hash, RunConfig};
use cbs_antiloc::medium::{sample_position, CloudConfig};
use cbs_antiloc::{atom, oracles, output, ChannelSpec, LevelScheme};

#[derive(Parser)]
#[command(
    name = "cbs-antiloc",
    about = "Coherent-backscattering antilocalization simulator for an oriented multilevel atomic gas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); falls back to CBS_ANTILOC_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory prepended to relative output paths.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the enhancement-factor spectrum over the detuning grid.
    Spectrum,
    /// Compute single/double light-beating spectral profiles.
    Beatspec,
    /// Run the fast pre-flight oracle suite.
    Oracles,
    /// Validate the order-2 MC estimator against deterministic quadrature.
    QuadratureCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("CBS_ANTILOC_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("failed to configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    match &cli.command {
        Command::Oracles => run_oracles(),
        Command::QuadratureCheck => run_quadrature_check(),
        Command::Spectrum => with_config(&cli, run_spectrum),
        Command::Beatspec => with_config(&cli, run_beatspec),
    }
}

struct LoadedConfig {
    config: RunConfig,
    hash: String,
    seed: u64,
    out_dir: Option<PathBuf>,
}

fn with_config(cli: &Cli, run: fn(&LoadedConfig) -> ExitCode) -> ExitCode {
    let Some(path) = &cli.config else {
        eprintln!("--config PATH is required for this subcommand");
        return ExitCode::from(2);
    };
    let raw = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let config: RunConfig = match serde_json::from_slice(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!(
                "config parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            );
            return ExitCode::from(2);
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("invalid configuration: {e}");
        return ExitCode::from(2);
    }
    let seed = cli.seed.unwrap_or(config.seed);
    let loaded = LoadedConfig {
        hash: config_hash(&raw),
        config,
        seed,
        out_dir: cli.out.clone(),
    };
    run(&loaded)
}

fn resolve(out_dir: &Option<PathBuf>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn build_all(
    loaded: &LoadedConfig,
) -> Result<(LevelScheme, CloudConfig, ChannelSpec), cbs::CbsError> {
    let scheme = loaded.config.build_scheme()?;
    let cloud = loaded.config.build_cloud()?;
    let channel = loaded.config.build_channel(&scheme)?;
    Ok((scheme, cloud, channel))
}

fn run_spectrum(loaded: &LoadedConfig) -> ExitCode {
    let (scheme, cloud, channel) = match build_all(loaded) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let deltas = loaded.config.deltas();
    let records = match cbs::mc_spectrum(
        &channel,
        &scheme,
        &cloud,
        &deltas,
        loaded.config.n_samples,
        loaded.config.n_max_order,
        loaded.seed,
    ) {
        Ok(r) => r,
        Err(cbs::CbsError::Config(msg)) => {
            eprintln!("invalid configuration: {msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("simulation failed: {e}");
            return ExitCode::from(3);
        }
    };

    // bug trap: result invariants must hold exactly
    for r in &records {
        let x_check = if r.sigma_single + r.sigma_ladder > 0.0 {
            (r.sigma_single + r.sigma_ladder + r.sigma_interf)
                / (r.sigma_single + r.sigma_ladder)
        } else {
            1.0
        };
        let bad = r.sigma_single < 0.0
            || r.sigma_ladder < 0.0
            || r.sigma_interf.abs() > r.sigma_ladder * (1.0 + 1e-9) + 1e-300
            || (r.x_ef - x_check).abs() > 1e-12 * x_check.abs().max(1.0);
        if bad {
            eprintln!("result invariant violated at Δ = {}", r.delta);
            return ExitCode::from(3);
        }
    }

    let csv_path = resolve(&loaded.out_dir, &loaded.config.outputs.csv_path);
    if let Err(e) = output::write_spectrum_csv(&csv_path, &records, &loaded.hash, loaded.seed) {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return ExitCode::from(1);
    }
    println!("wrote {}", csv_path.display());

    if let Some(plot) = &loaded.config.outputs.plot_path {
        let resonances: Vec<f64> = scheme.excited_levels.iter().map(|&(_, e)| e).collect();
        let plot_path = resolve(&loaded.out_dir, plot);
        if let Err(e) = output::write_spectrum_svg(
            &plot_path,
            &records,
            &resonances,
            &loaded.hash,
            loaded.seed,
        ) {
            eprintln!("cannot write {}: {e}", plot_path.display());
            return ExitCode::from(1);
        }
        println!("wrote {}", plot_path.display());
    }

    if let Some((delta_min, xef_min)) = cbs::xef_minimum(&records) {
        println!("X_EF minimum {xef_min:.5} at Δ = {delta_min:.3}γ");
    }
    ExitCode::SUCCESS
}

fn run_beatspec(loaded: &LoadedConfig) -> ExitCode {
    let (scheme, cloud, channel) = match build_all(loaded) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let beat = &loaded.config.beat;
    let v_rms = beat
        .v_rms
        .unwrap_or_else(|| cloud.temperature.max(0.0).sqrt());
    let vmodel = VelocityModel::new(v_rms);
    let omega_r = beat.omega_r.unwrap_or_else(|| {
        atom::zeeman_energy(&scheme, scheme.populated_f0, channel.final_m).unwrap_or(0.0)
    });
    let grid: Vec<f64> = match &beat.grid {
        Some(g) => g.points(),
        None => {
            let width = (2.0 * v_rms).max(1e-3);
            let half = 8.0 * width;
            (0..801)
                .map(|i| -half + 2.0 * half * f64::from(i) / 800.0)
                .collect()
        }
    };

    let single = beatspec::single_profile(&vmodel, 1.0, omega_r, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(loaded.seed);
    let sampler = || {
        loop {
            let a = sample_position(&cloud, &mut rng);
            let b = sample_position(&cloud, &mut rng);
            let d = b - (a);
            if d.norm() >= cbs::R_MIN {
                return d;
            }
        }
    };
    let double = beatspec::double_profile(
        &vmodel,
        1.0,
        omega_r,
        sampler,
        beat.n_geometries,
        &grid,
    );

    let (resolvable, margin) = beatspec::channel_resolvability(&single, omega_r);
    println!(
        "beat carrier ω_R = {omega_r:.4}γ, Doppler FWHM/ω_R = {margin:.4} ({})",
        if resolvable { "resolvable" } else { "not resolvable" }
    );

    let csv_path = resolve(&loaded.out_dir, &loaded.config.outputs.csv_path);
    if let Err(e) =
        output::write_beatspec_csv(&csv_path, &single, &double, &loaded.hash, loaded.seed)
    {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return ExitCode::from(1);
    }
    println!("wrote {}", csv_path.display());
    ExitCode::SUCCESS
}

fn run_oracles() -> ExitCode {
    let outcomes = oracles::run_all();
    let mut all_passed = true;
    for o in &outcomes {
        println!(
            "[{}] {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        all_passed &= o.passed;
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_quadrature_check() -> ExitCode {
    let scheme = LevelScheme::rb85_default();
    // optically thin so the deterministic quadrature resolves the
    // attenuation phases; the MC weights being validated are the same
    // at any depth
    let cloud = CloudConfig::sphere(700.0, 0.1);
    let channel = ChannelSpec::helicity_preserving(&scheme, DiagramSet::Full);
    // one on-resonance point and two in the antilocalization windows
    let mut ok = true;
    for delta in [0.0, -10.0, -25.0] {
        let (quad_l, quad_i) =
            match cbs::pair_quadrature(&channel, &scheme, &cloud, delta, 14, 48, 32) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("quadrature failed: {e}");
                    return ExitCode::from(1);
                }
            };
        let records =
            match cbs::mc_spectrum(&channel, &scheme, &cloud, &[delta], 200_000, 2, 991) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("MC failed: {e}");
                    return ExitCode::from(1);
                }
            };
        let r = &records[0];
        let l_ok = (r.sigma_ladder - quad_l).abs() <= 0.02 * quad_l + 3.0 * r.stderr_ladder;
        let i_ok =
            (r.sigma_interf - quad_i).abs() <= 0.02 * quad_i.abs() + 3.0 * r.stderr_interf;
        println!(
            "[{}] Δ = {delta:+.2}γ: ladder MC {:.5e} vs quad {quad_l:.5e}; interf MC {:.5e} vs quad {quad_i:.5e}",
            if l_ok && i_ok { "PASS" } else { "FAIL" },
            r.sigma_ladder,
            r.sigma_interf,
        );
        ok &= l_ok && i_ok;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
