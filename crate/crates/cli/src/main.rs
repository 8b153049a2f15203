mod config;
mod surface_arg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use immersa::geodesic::{completeness_diagnostics, solve_geodesic_bvp, CompletenessReport};
use immersa::inequalities::{ensemble_scan, report_csv_rows, InequalityId, REPORT_CSV_HEADER};
use immersa::io::{self, fmt_f64};
use immersa::matching::{quotient_distance, MatchOptions};
use immersa::path::{path_energy, path_length};
use immersa::sampler::FieldSampler;
use immersa::seq_model::{seq_distance, seq_geodesic_bvp, SeqPoint, SeqSolverOptions};
use immersa::{selftest, Error, InducedGeometry, Result, SurfaceSpec};

use config::{Overrides, RunConfig};
use surface_arg::{load_surface, parse_generator};

#[derive(Parser, Debug)]
#[command(name = "immersa", version, about = "Sobolev geometry of immersed tori")]
struct Cli {
    #[command(flatten)]
    flags: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a surface generator and save it.
    Generate {
        /// e.g. clifford(64), round_torus(64,2,1), bumpy_torus(32,2,1,0.15,2,7), scaled(clifford(64),2)
        spec: String,
        /// Write the binary format instead of text.
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        name: Option<String>,
    },
    /// Induced metric, volume density and |H| per node, plus invariant checks.
    Geometry { surface: String },
    /// Energy, length and completeness diagnostics of a saved path.
    Energy { path: PathBuf },
    /// Geodesic between two surfaces by energy minimization.
    Geodesic { from: String, to: String },
    /// Shape-space distance: geodesic with a reparametrized endpoint.
    Match {
        from: String,
        to: String,
        #[arg(long = "outer-iters", default_value_t = 5)]
        outer_iters: usize,
    },
    /// Ensemble scan of inequality ratios.
    Ineq {
        /// Inequality name or "all".
        #[arg(long, default_value = "all")]
        inequality: String,
        /// Generator specs; the size argument is ignored in favour of --sizes.
        #[arg(long = "surface")]
        surfaces: Vec<String>,
        /// Grid sizes; defaults to --grid.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long = "max-freq", default_value_t = 8)]
        max_freq: usize,
    },
    /// Geodesic between two points of the sequence-space model.
    Seq {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Vec<f64>,
    },
    /// Run the acceptance criteria (all, or the listed ids).
    Selftest { ids: Vec<usize> },
    /// Export a surface in R³ as a triangle mesh.
    Obj {
        surface: String,
        #[arg(long)]
        name: Option<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        Error::ImmersionViolation { .. }
        | Error::WarpDegenerate { .. }
        | Error::InfeasibleInitialization
        | Error::DomainViolation { .. }
        | Error::DegenerateSample(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("IMMERSA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("IMMERSA_THREADS='{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn inputs(cmd: &Command) -> (&'static str, Vec<String>) {
    match cmd {
        Command::Generate { spec, .. } => ("generate", vec![spec.clone()]),
        Command::Geometry { surface } => ("geometry", vec![surface.clone()]),
        Command::Energy { path } => ("energy", vec![path.display().to_string()]),
        Command::Geodesic { from, to } => ("geodesic", vec![from.clone(), to.clone()]),
        Command::Match { from, to, .. } => ("match", vec![from.clone(), to.clone()]),
        Command::Ineq { surfaces, .. } => ("ineq", surfaces.clone()),
        Command::Seq { .. } => ("seq", Vec::new()),
        Command::Selftest { .. } => ("selftest", Vec::new()),
        Command::Obj { surface, .. } => ("obj", vec![surface.clone()]),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (name, ins) = inputs(&cli.command);
    let cfg = RunConfig::resolve(&cli.flags, name, ins)?;
    if let Command::Selftest { ids } = &cli.command {
        return Ok(selftest_cmd(ids));
    }
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("run.toml"), cfg.to_toml())?;
    match cli.command {
        Command::Generate { spec, binary, name } => generate(&cfg, &spec, binary, name),
        Command::Geometry { surface } => geometry(&cfg, &surface),
        Command::Energy { path } => energy(&cfg, &path),
        Command::Geodesic { from, to } => geodesic(&cfg, &from, &to),
        Command::Match { from, to, outer_iters } => match_cmd(&cfg, &from, &to, outer_iters),
        Command::Ineq {
            inequality,
            surfaces,
            sizes,
            samples,
            max_freq,
        } => ineq(&cfg, &inequality, &surfaces, &sizes, samples, max_freq),
        Command::Seq { x0, x1 } => seq(&cfg, x0, x1),
        Command::Obj { surface, name } => obj(&cfg, &surface, name),
        Command::Selftest { .. } => unreachable!(),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn report(key: &str, value: impl std::fmt::Display) {
    println!("{key} = {value}");
}

fn generate(cfg: &RunConfig, spec: &str, binary: bool, name: Option<String>) -> Result<()> {
    let f = parse_generator(spec)?.generate(cfg.stencil_order)?;
    let file = cfg.out.join(name.unwrap_or_else(|| if binary { "surface.gib" } else { "surface.gif" }.into()));
    io::save_with(&file, |w| {
        if binary {
            io::write_gib1(w, &f)
        } else {
            io::write_gif1(w, &f)
        }
    })?;
    report("file", file.display());
    report("grid", format!("{}x{}", f.grid().n_u(), f.grid().n_v()));
    report("dim", f.dim());
    Ok(())
}

fn geometry(cfg: &RunConfig, surface: &str) -> Result<()> {
    let f = load_surface(surface, cfg.stencil_order)?;
    let geom = InducedGeometry::new(&f, cfg.immersion_floor)?;
    let abs_h = geom.mean_curvature_norm();
    let grid = geom.grid();
    let rows: Vec<String> = (0..grid.len())
        .map(|node| {
            let (i, j) = grid.node_ij(node);
            let g = geom.node_g(node);
            format!(
                "{node},{i},{j},{},{},{},{},{}",
                fmt_f64(g[0]),
                fmt_f64(g[1]),
                fmt_f64(g[3]),
                fmt_f64(geom.rho.values()[node]),
                fmt_f64(abs_h.values()[node])
            )
        })
        .collect();
    let file = cfg.out.join("geometry.csv");
    io::save_with(&file, |w| io::write_csv(w, "node,i,j,g_uu,g_uv,g_vv,rho,abs_h", &rows))?;
    let sym = (0..grid.len())
        .map(|n| {
            let g = geom.node_g(n);
            (g[1] - g[2]).abs()
        })
        .fold(0.0, f64::max);
    report("file", file.display());
    report("volume", fmt_f64(geom.volume()));
    report("min_singular_value", fmt_f64(geom.min_singular_value));
    report("rho_min", fmt_f64(geom.rho.min_value()));
    report("rho_max", fmt_f64(geom.rho.max_value()));
    report("abs_h_max", fmt_f64(abs_h.max_value()));
    report("g_symmetry_defect", fmt_f64(sym));
    Ok(())
}

fn diagnostics_csv(file: &Path, rep: &CompletenessReport) -> Result<()> {
    let rows: Vec<String> = rep
        .steps
        .iter()
        .map(|s| {
            [
                s.domination_ratio,
                s.energy_density,
                s.grad_velocity_l2,
                s.grad_velocity_l2_avg,
                s.rho_min,
                s.rho_max,
                s.min_singular_value,
                s.g_linf,
                s.g_inv_linf,
                s.s_l4,
                s.gamma_l4,
                s.ds_l2,
            ]
            .iter()
            .fold(s.step.to_string(), |acc, v| acc + "," + &fmt_f64(*v))
        })
        .collect();
    io::save_with(file, |w| {
        io::write_csv(
            w,
            "step,domination_ratio,energy_density,grad_velocity_l2,grad_velocity_l2_avg,rho_min,rho_max,\
             min_singular_value,g_linf,g_inv_linf,s_l4,gamma_l4,ds_l2",
            &rows,
        )
    })
}

fn report_diagnostics(rep: &CompletenessReport) {
    report("min_rho", fmt_f64(rep.min_rho()));
    for g in &rep.growth {
        report(&format!("growth_{}", g.quantity), fmt_f64(g.constant));
    }
}

fn energy(cfg: &RunConfig, path: &Path) -> Result<()> {
    let p = io::load_path(path, cfg.stencil_order)?;
    let m = cfg.metric();
    let rep = completeness_diagnostics(&p, &m)?;
    let file = cfg.out.join("diagnostics.csv");
    diagnostics_csv(&file, &rep)?;
    report("file", file.display());
    report("steps", p.steps());
    report("energy", fmt_f64(path_energy(&p, &m)?));
    report("length", fmt_f64(path_length(&p, &m)?));
    report_diagnostics(&rep);
    Ok(())
}

fn geodesic(cfg: &RunConfig, from: &str, to: &str) -> Result<()> {
    let f0 = load_surface(from, cfg.stencil_order)?;
    let f1 = load_surface(to, cfg.stencil_order)?;
    let m = cfg.metric();
    let sol = solve_geodesic_bvp(&f0, &f1, cfg.steps, &m, &cfg.solver())?;
    let path_file = cfg.out.join("path.gpf");
    io::save_with(&path_file, |w| io::write_gpf1(w, &sol.path))?;
    let rows: Vec<String> = sol
        .history
        .iter()
        .map(|h| format!("{},{},{},{},{}", h.iteration, fmt_f64(h.value), fmt_f64(h.grad_sup), fmt_f64(h.step), h.backtracks))
        .collect();
    let hist_file = cfg.out.join("history.csv");
    io::save_with(&hist_file, |w| io::write_csv(w, "iteration,energy,grad_sup,step,backtracks", &rows))?;
    let rep = completeness_diagnostics(&sol.path, &m)?;
    diagnostics_csv(&cfg.out.join("diagnostics.csv"), &rep)?;
    report("path", path_file.display());
    report("status", format!("{:?}", sol.status));
    report("iterations", sol.iterations);
    report("initial_energy", fmt_f64(sol.initial_energy));
    report("energy", fmt_f64(sol.energy));
    report("length", fmt_f64(path_length(&sol.path, &m)?));
    report("grad_sup", fmt_f64(sol.grad_sup));
    report_diagnostics(&rep);
    Ok(())
}

fn match_cmd(cfg: &RunConfig, from: &str, to: &str, outer_iters: usize) -> Result<()> {
    let f0 = load_surface(from, cfg.stencil_order)?;
    let f1 = load_surface(to, cfg.stencil_order)?;
    let opts = MatchOptions {
        solver: cfg.solver(),
        outer_iters,
        ..MatchOptions::default()
    };
    let r = quotient_distance(&f0, &f1, cfg.steps, &cfg.metric(), &opts)?;
    let path_file = cfg.out.join("path.gpf");
    io::save_with(&path_file, |w| io::write_gpf1(w, &r.path))?;
    let grid = r.warp.grid();
    let rows: Vec<String> = (0..grid.len())
        .map(|n| {
            let (i, j) = grid.node_ij(n);
            format!("{n},{i},{j},{},{}", fmt_f64(r.warp.du().values()[n]), fmt_f64(r.warp.dv().values()[n]))
        })
        .collect();
    let warp_file = cfg.out.join("warp.csv");
    io::save_with(&warp_file, |w| io::write_csv(w, "node,i,j,du,dv", &rows))?;
    let it_rows: Vec<String> = r
        .accepted
        .iter()
        .enumerate()
        .map(|(k, a)| format!("{k},{},{},{}", fmt_f64(a.energy), fmt_f64(a.min_rho), fmt_f64(a.min_jacobian)))
        .collect();
    io::save_with(&cfg.out.join("accepted.csv"), |w| {
        io::write_csv(w, "iterate,energy,min_rho,min_jacobian", &it_rows)
    })?;
    report("path", path_file.display());
    report("distance", fmt_f64(r.distance));
    report("parametrized_distance", fmt_f64(r.parametrized_distance));
    report("accepted_iterates", r.accepted.len());
    report("rejected_warp_steps", r.rejected_warp_steps);
    report("min_jacobian", fmt_f64(r.warp.min_jacobian().1));
    Ok(())
}

fn ineq(
    cfg: &RunConfig,
    inequality: &str,
    surfaces: &[String],
    sizes: &[usize],
    samples: usize,
    max_freq: usize,
) -> Result<()> {
    let ids: Vec<InequalityId> = if inequality == "all" {
        InequalityId::ALL.to_vec()
    } else {
        vec![inequality.parse()?]
    };
    let family: Vec<SurfaceSpec> = if surfaces.is_empty() {
        vec![
            SurfaceSpec::Clifford,
            SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 },
            SurfaceSpec::bumpy_default(cfg.seed),
        ]
    } else {
        surfaces.iter().map(|s| parse_generator(s).map(|g| g.spec)).collect::<Result<_>>()?
    };
    let sizes = if sizes.is_empty() { vec![cfg.grid] } else { sizes.to_vec() };
    let sampler = FieldSampler::new(max_freq, cfg.seed);
    let mut rows = Vec::new();
    for &id in &ids {
        for s in &family {
            let rep = ensemble_scan(std::slice::from_ref(s), &sampler, id, &sizes, samples)?;
            println!(
                "{} on {}: max {} drift {}",
                id,
                rep.surface,
                fmt_f64(rep.max_ratio),
                fmt_f64(rep.ratio_drift)
            );
            rows.extend(report_csv_rows(&rep));
        }
    }
    let file = cfg.out.join("ineq.csv");
    io::save_with(&file, |w| io::write_csv(w, REPORT_CSV_HEADER, &rows))?;
    report("file", file.display());
    Ok(())
}

fn seq(cfg: &RunConfig, x0: Vec<f64>, x1: Vec<f64>) -> Result<()> {
    let (p0, p1) = (SeqPoint::new(x0)?, SeqPoint::new(x1)?);
    let d = seq_distance(&p0, &p1)?;
    let sol = seq_geodesic_bvp(&p0, &p1, cfg.steps, &SeqSolverOptions::default())?;
    let header = std::iter::once("t".to_string())
        .chain((1..=p0.len()).map(|i| format!("x{i}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = sol
        .path
        .iter()
        .enumerate()
        .map(|(t, p)| p.values().iter().fold(t.to_string(), |acc, v| acc + "," + &fmt_f64(*v)))
        .collect();
    let file = cfg.out.join("seq_path.csv");
    io::save_with(&file, |w| io::write_csv(w, &header, &rows))?;
    report("file", file.display());
    report("distance", fmt_f64(d));
    report("distance_squared", fmt_f64(d * d));
    report("bvp_energy", fmt_f64(sol.energy));
    report("converged", sol.converged);
    Ok(())
}

fn obj(cfg: &RunConfig, surface: &str, name: Option<String>) -> Result<()> {
    let f = load_surface(surface, cfg.stencil_order)?;
    let file = cfg.out.join(name.unwrap_or_else(|| "surface.obj".into()));
    io::save_with(&file, |w| io::export_obj(w, &f))?;
    report("file", file.display());
    report("vertices", f.grid().len());
    report("faces", 2 * f.grid().len());
    Ok(())
}

fn selftest_cmd(ids: &[usize]) -> ExitCode {
    let reports: Vec<_> = if ids.is_empty() {
        selftest::run_all()
    } else {
        ids.iter().map(|&id| selftest::run_criterion(id)).collect()
    };
    for r in &reports {
        println!(
            "{} [{:>2}] {} ({:.1} s): {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.title,
            r.seconds,
            r.detail
        );
    }
    if reports.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
