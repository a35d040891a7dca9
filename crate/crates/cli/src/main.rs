use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homtype::czdecomp::{cz_at_height, sparse_family};
use homtype::dyadic::{adjacent_family, build_grid, verify_grid, DyadicGrid};
use homtype::error::{Error, Result};
use homtype::experiments::{emit_report, run_experiment, ExperimentConfig, ExperimentKind, ReportFormat};
use homtype::exponents::{generate_exponent, ExponentFunction, ExponentSpec};
use homtype::lpvar::{luxemburg_norm, modular, PointFunction, DEFAULT_TOL};
use homtype::operators::{domination_check, dyadic_maximal, hl_maximal, strongpp_bound, strongpp_check, weak11_check};
use homtype::space::{generate_space, FiniteSpace, SpaceSpec};
use homtype::weights::{
    ainfty_diagnostics, apq_constant, apq_constant_dyadic, apq_per_ball, default_exponent_grid, derived_weights,
    generate_weight, subset_samples, Weight, WeightSpec,
};
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_ASSERTION: u8 = 2;

#[derive(Parser)]
#[command(name = "homtype", version, about = "Harmonic analysis on finite spaces of homogeneous type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate spaces and report their constants.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Generate exponents and report log-Hölder constants.
    #[command(subcommand)]
    Exp(ExpCmd),
    /// Generate weights.
    #[command(subcommand)]
    Weight(WeightCmd),
    /// Print the Luxemburg norm of a function.
    Norm(NormArgs),
    /// Print the modular of a function, optionally of f / lambda.
    Modular(ModularArgs),
    /// Print the A_p(.) constant and its witness.
    Apq(ApqArgs),
    /// Print A_infinity diagnostics of a weight.
    Ainfty(AinftyArgs),
    /// Build and verify dyadic grids.
    #[command(subcommand)]
    Grid(GridCmd),
    /// Write the maximal function of f to a file.
    Maximal(MaximalArgs),
    /// Weak (1,1), strong (p,p) and domination checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Calderón-Zygmund cubes at one height or at all powers of a base.
    Cz(CzArgs),
    /// Run an experiment from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum SpaceCmd {
    Gen {
        /// e.g. `grid:dim=1,side=32,spacing=1,mass=uniform`, `power:n=32,gamma=2`, `cantor:depth=4,ratio=0.3`
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    Constants {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExpCmd {
    Gen {
        #[arg(long)]
        space: PathBuf,
        /// e.g. `constant:value=2`, `ramp:p_inf=2,c=0.5`, `step:low=1.5,high=3,threshold=0.5`
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        base_point: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Lh {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        exp: PathBuf,
    },
}

#[derive(Subcommand)]
enum WeightCmd {
    Gen {
        #[arg(long)]
        space: PathBuf,
        /// e.g. `unit`, `power:a=0.25`, `two_level:low=1,high=4,fraction=0.25`, `log_uniform:spread=1,seed=0`
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        base_point: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    exp: PathBuf,
    #[arg(long = "fn")]
    func: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct ModularArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    exp: PathBuf,
    #[arg(long = "fn")]
    func: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct ApqArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    exp: PathBuf,
    #[arg(long)]
    weight: PathBuf,
    /// Take the maximum over the cubes of this grid instead of balls.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Write per-ball ratios as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct AinftyArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    weight: PathBuf,
    /// Test W = w^p(.) instead of the weight itself.
    #[arg(long)]
    exp: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum GridCmd {
    Build {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        d0: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Verify {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        grid: PathBuf,
    },
}

#[derive(Args)]
struct MaximalArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long = "fn")]
    func: PathBuf,
    /// Dyadic maximal function on this grid; Hardy-Littlewood without it.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CheckCmd {
    Weak11 {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long)]
        sigma: Option<PathBuf>,
    },
    Strongpp {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long)]
        sigma: Option<PathBuf>,
        #[arg(long)]
        p: f64,
    },
    Domination {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long)]
        d0: Option<f64>,
    },
}

#[derive(Args)]
struct CzArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    #[arg(long = "fn")]
    func: PathBuf,
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long, conflicts_with = "base_a", required_unless_present = "base_a")]
    lambda: Option<f64>,
    #[arg(long)]
    base_a: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// strong-type, weak-type, necessity or blowup
    kind: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load_space(p: &Path) -> Result<FiniteSpace> {
    FiniteSpace::load(p)
}

fn load_fn(p: &Path, n: usize) -> Result<PointFunction> {
    let f = PointFunction::load(p)?;
    if f.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: f.len() });
    }
    Ok(f)
}

fn load_weight(p: &Path, n: usize) -> Result<Weight> {
    let w = Weight::load(p)?;
    if w.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: w.len() });
    }
    Ok(w)
}

fn load_exp(p: &Path, n: usize) -> Result<ExponentFunction> {
    let e = ExponentFunction::load(p)?;
    if e.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: e.len() });
    }
    Ok(e)
}

fn load_grid(p: &Path, n: usize) -> Result<DyadicGrid> {
    let g = DyadicGrid::load(p)?;
    if g.n() != n {
        return Err(Error::LengthMismatch { expected: n, actual: g.n() });
    }
    Ok(g)
}

fn load_sigma(p: Option<&PathBuf>, n: usize) -> Result<Option<Weight>> {
    p.map(|p| load_weight(p, n)).transpose()
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key} = {value}");
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Space(SpaceCmd::Gen { spec, out }) => {
            let spec: SpaceSpec = spec.parse()?;
            let s = generate_space(&spec)?;
            s.save(&out)?;
            kv("n", s.n());
        }
        Command::Space(SpaceCmd::Constants { input }) => {
            let s = load_space(&input)?;
            let lm = s.lower_mass_check();
            kv("n", s.n());
            kv("a0", s.quasimetric_constant());
            kv("c_mu", s.doubling_constant(None));
            kv("lower_mass_c", lm.constant);
            kv("lower_mass_exponent", lm.exponent);
        }
        Command::Exp(ExpCmd::Gen { space, spec, base_point, out }) => {
            let s = load_space(&space)?;
            let spec: ExponentSpec = spec.parse()?;
            let p = generate_exponent(&s, &spec, base_point)?;
            p.save(&out)?;
            kv("p_minus", p.p_minus());
            kv("p_plus", p.p_plus());
        }
        Command::Exp(ExpCmd::Lh { space, exp }) => {
            let s = load_space(&space)?;
            let p = load_exp(&exp, s.n())?;
            kv("c0", p.lh0_constant(&s)?);
            kv("c_inf", p.lhinf_constant(&s)?);
            kv("p_minus", p.p_minus());
            kv("p_plus", p.p_plus());
        }
        Command::Weight(WeightCmd::Gen { space, spec, base_point, out }) => {
            let s = load_space(&space)?;
            let spec: WeightSpec = spec.parse()?;
            let w = generate_weight(&s, &spec, base_point)?;
            w.save(&out)?;
            kv("n", w.len());
        }
        Command::Norm(a) => {
            let s = load_space(&a.space)?;
            let p = load_exp(&a.exp, s.n())?;
            let f = load_fn(&a.func, s.n())?;
            kv("norm", luxemburg_norm(&s, &p, &f, a.tol)?);
        }
        Command::Modular(a) => {
            let s = load_space(&a.space)?;
            let p = load_exp(&a.exp, s.n())?;
            let mut f = load_fn(&a.func, s.n())?;
            if let Some(l) = a.lambda {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::InvalidHeight(l));
                }
                f.values.iter_mut().for_each(|v| *v /= l);
            }
            kv("rho", modular(&s, &p, &f));
        }
        Command::Apq(a) => {
            let s = load_space(&a.space)?;
            let p = load_exp(&a.exp, s.n())?;
            let w = load_weight(&a.weight, s.n())?;
            match &a.grid {
                Some(g) => {
                    let g = load_grid(g, s.n())?;
                    let (c, q) = apq_constant_dyadic(&s, &g, &p, &w)?;
                    kv("apq_dyadic", c);
                    kv("witness_cube", q);
                    kv("witness_generation", g.cube(q).generation);
                    kv("witness_size", g.cube(q).members.len());
                }
                None => {
                    let (c, b) = apq_constant(&s, &p, &w, None)?;
                    kv("apq", c);
                    kv("witness_center", b.center);
                    kv("witness_radius", b.radius);
                    kv("witness_size", b.members.len());
                }
            }
            if let Some(path) = &a.dump {
                let mut out = csv::Writer::from_path(path).map_err(csv_err)?;
                out.write_record(["center", "radius", "size", "ratio"]).map_err(csv_err)?;
                for (b, r) in apq_per_ball(&s, &p, &w)? {
                    out.write_record([
                        b.center.to_string(),
                        format!("{:.12e}", b.radius),
                        b.members.len().to_string(),
                        format!("{r:.12e}"),
                    ])
                    .map_err(csv_err)?;
                }
                out.flush()?;
            }
        }
        Command::Ainfty(a) => {
            let s = load_space(&a.space)?;
            let w = load_weight(&a.weight, s.n())?;
            let (big_w, grid) = match &a.exp {
                Some(e) => {
                    let p = load_exp(e, s.n())?;
                    (derived_weights(&p, &w)?.0, default_exponent_grid(p.p_plus()))
                }
                None => (w, default_exponent_grid(1.0)),
            };
            let samples = subset_samples(&s, a.random, a.seed);
            let r = ainfty_diagnostics(&s, &big_w, &samples, &grid)?;
            kv("pairs", r.pairs);
            kv("w_doubling", r.w_doubling);
            for (e, c) in &r.eps_fits {
                kv(&format!("eps_fit[{e}]"), c);
            }
            for (d, c) in &r.delta_fits {
                kv(&format!("delta_fit[{d}]"), c);
            }
            kv("best_eps", format!("{} {}", r.best_eps.0, r.best_eps.1));
            kv("best_delta", format!("{} {}", r.best_delta.0, r.best_delta.1));
        }
        Command::Grid(GridCmd::Build { space, d0, seed, out }) => {
            let s = load_space(&space)?;
            let g = build_grid(&s, d0, seed)?;
            g.save(&out)?;
            kv("levels", g.num_levels());
            kv("top", g.top());
            kv("bottom", g.bottom());
            kv("achieved_cd", g.achieved_cd());
            kv("achieved_eps", g.achieved_eps());
        }
        Command::Grid(GridCmd::Verify { space, grid }) => {
            let s = load_space(&space)?;
            let g = load_grid(&grid, s.n())?;
            let r = verify_grid(&s, &g);
            for c in &r.checks {
                let mut line = format!("{} ({})", if c.pass { "pass" } else { "fail" }, c.name);
                if let Some(d) = &c.detail {
                    line.push_str(&format!(": {d}"));
                }
                kv(&format!("property{}", c.property), line);
            }
            kv("achieved_cd", r.achieved_cd);
            kv("achieved_eps", r.achieved_eps);
            if !r.all_pass() {
                return Ok(EXIT_ASSERTION);
            }
        }
        Command::Maximal(a) => {
            let s = load_space(&a.space)?;
            let f = load_fn(&a.func, s.n())?;
            let sigma = load_sigma(a.sigma.as_ref(), s.n())?;
            let m = match &a.grid {
                Some(g) => dyadic_maximal(&s, &load_grid(g, s.n())?, &f, sigma.as_ref())?,
                None => {
                    if sigma.is_some() {
                        return Err(Error::Config("--sigma requires --grid".into()));
                    }
                    hl_maximal(&s, &f)?
                }
            };
            m.save(&a.out)?;
        }
        Command::Check(CheckCmd::Weak11 { space, grid, func, sigma }) => {
            let s = load_space(&space)?;
            let g = load_grid(&grid, s.n())?;
            let f = load_fn(&func, s.n())?;
            let sigma = load_sigma(sigma.as_ref(), s.n())?;
            let r = weak11_check(&s, &g, &f, sigma.as_ref(), None)?;
            kv("weak11_ratio", r.worst_ratio);
            kv("worst_lambda", r.worst_lambda);
            kv("lambdas_tested", r.lambdas_tested);
        }
        Command::Check(CheckCmd::Strongpp { space, grid, func, sigma, p }) => {
            let s = load_space(&space)?;
            let g = load_grid(&grid, s.n())?;
            let f = load_fn(&func, s.n())?;
            let sigma = load_sigma(sigma.as_ref(), s.n())?;
            kv("strongpp_ratio", strongpp_check(&s, &g, &f, sigma.as_ref(), p)?);
            kv("bound", strongpp_bound(p));
        }
        Command::Check(CheckCmd::Domination { space, func, count, d0 }) => {
            let s = load_space(&space)?;
            let f = load_fn(&func, s.n())?;
            if count == 0 {
                return Err(Error::Config("--count must be at least 1".into()));
            }
            let seeds: Vec<u64> = (0..count as u64).collect();
            let fam = adjacent_family(&s, d0, &seeds)?;
            let (c, x) = domination_check(&s, &fam.grids, &f)?;
            kv("domination_ratio", c);
            kv("witness_point", x);
            kv("covering_factor", fam.covering_factor);
        }
        Command::Cz(a) => {
            let s = load_space(&a.space)?;
            let g = load_grid(&a.grid, s.n())?;
            let f = load_fn(&a.func, s.n())?;
            let sigma = load_sigma(a.sigma.as_ref(), s.n())?;
            let cube_json = |q: usize| {
                let c = g.cube(q);
                json!({ "id": q, "generation": c.generation, "center": c.center, "members": c.members })
            };
            let report = match (a.lambda, a.base_a) {
                (Some(l), _) => {
                    let d = cz_at_height(&s, &g, &f, sigma.as_ref(), l)?;
                    json!({
                        "lambda": d.lambda,
                        "lambda0": d.lambda0,
                        "achieved_ccz": d.achieved_ccz,
                        "exact_cover": d.exact_cover,
                        "maximal": d.maximal,
                        "cubes": d.cubes.iter().map(|&q| cube_json(q)).collect::<Vec<_>>(),
                    })
                }
                (None, Some(base)) => {
                    let fam = sparse_family(&s, &g, &f, sigma.as_ref(), base)?;
                    let levels: Vec<_> = fam
                        .levels
                        .iter()
                        .map(|l| {
                            json!({
                                "k": l.k,
                                "lambda": l.lambda,
                                "cubes": l.cubes.iter().map(|&q| cube_json(q)).collect::<Vec<_>>(),
                                "sparse_sets": l.sparse_sets,
                                "thickness": l.thickness,
                            })
                        })
                        .collect();
                    json!({
                        "a": fam.a,
                        "lambda0": fam.lambda0,
                        "achieved_ccz": fam.achieved_ccz,
                        "disjoint": fam.disjoint,
                        "min_thickness": fam.min_thickness,
                        "thick": fam.thick,
                        "exact_cover": fam.exact_cover,
                        "maximal": fam.maximal,
                        "levels": levels,
                    })
                }
                (None, None) => return Err(Error::Config("one of --lambda or --base-a is required".into())),
            };
            let text = serde_json::to_string_pretty(&report)?;
            match &a.out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
        Command::Experiment(a) => {
            let kind: ExperimentKind = a.kind.parse()?;
            let config = ExperimentConfig::load(&a.config)?;
            std::fs::create_dir_all(&a.out)?;
            let report = run_experiment(kind, &config)?;
            emit_report(&report, ReportFormat::Csv, &a.out.join(format!("{}.csv", kind.name())))?;
            emit_report(&report, ReportFormat::Json, &a.out.join(format!("{}.json", kind.name())))?;
            kv("experiment", kind.name());
            kv("rows", report.rows.len());
            if let Some(c) = &report.classification {
                kv("classification", c);
            }
            for o in &report.assertions {
                kv(&format!("assert[{}]", o.name), if o.pass { "pass" } else { "fail" });
            }
            if !report.all_pass() {
                return Ok(EXIT_ASSERTION);
            }
        }
    }
    Ok(0)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
