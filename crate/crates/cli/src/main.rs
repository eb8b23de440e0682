mod report;

use clap::{Parser, Subcommand, ValueEnum};
use confsym_core::confsym::{classify, exterior_d, flat, obs, ObsReport};
use confsym_core::curvature;
use confsym_core::error::Error;
use confsym_core::geomdsl::{parse_expr, parse_geometry, GeometrySpec};
use confsym_core::suite::{self, CheckRecord, Mode, Status};
use confsym_core::symbols::PolySymbol;
use confsym_core::tensor::{unflatten, Geometry, TensorField, Var};
use report::*;
use std::process::ExitCode;

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "confsym", version, about = "Curvature, conformally invariant quantization and conformal symmetries of the Yamabe Laplacian")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the nonzero components of a curvature tensor.
    Curvature {
        file: String,
        #[arg(long, value_enum)]
        tensor: TensorKind,
        #[arg(long)]
        json: bool,
    },
    /// Decide whether a degree-2 symbol yields a (conformal) symmetry of Delta_Y.
    Classify {
        file: String,
        #[arg(long)]
        symbol: String,
        /// Degree-1 symbol added to the candidate.
        #[arg(long)]
        vector: Option<String>,
        /// Scalar declared in the file, used as the potential instead of the ansatz search.
        #[arg(long)]
        potential: Option<String>,
        /// Conformal factor F; obstruction and potential are computed for F*g.
        #[arg(long)]
        hat_metric: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print Obs(K), its flat and d(Obs^flat).
    Obs {
        file: String,
        #[arg(long)]
        symbol: String,
        #[arg(long)]
        hat_metric: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in verification suite over the shipped fixtures.
    PaperSuite {
        /// Evaluate residuals at seeded random points instead of exactly.
        #[arg(long)]
        numeric: bool,
        #[arg(long, default_value_t = suite::NUMERIC_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = suite::NUMERIC_POINTS)]
        points: usize,
        /// Regular expression on check names.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        json: bool,
        /// Include wall times in JSON (breaks byte-for-byte reproducibility).
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TensorKind {
    Christoffel,
    Riemann,
    Ricci,
    Scalar,
    Schouten,
    Weyl,
    Cotton,
}

/// An error tagged with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure(EXIT_INPUT, e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CONFSYM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let r = match cli.cmd {
        Cmd::Curvature { file, tensor, json } => cmd_curvature(&file, tensor, json),
        Cmd::Classify {
            file,
            symbol,
            vector,
            potential,
            hat_metric,
            json,
        } => cmd_classify(&file, &symbol, vector.as_deref(), potential.as_deref(), hat_metric.as_deref(), json),
        Cmd::Obs {
            file,
            symbol,
            hat_metric,
            json,
        } => cmd_obs(&file, &symbol, hat_metric.as_deref(), json),
        Cmd::PaperSuite {
            numeric,
            tol,
            seed,
            points,
            filter,
            json,
            timings,
        } => {
            let mode = if numeric { Mode::Numeric { seed, points, tol } } else { Mode::Symbolic };
            cmd_suite(mode, filter.as_deref(), json, timings)
        }
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("confsym: {msg}");
            ExitCode::from(code)
        }
    }
}

struct Input {
    bytes: Vec<u8>,
    spec: GeometrySpec,
    g: Geometry,
}

fn load(file: &str) -> Res<Input> {
    let bytes = std::fs::read(file).map_err(|e| Failure(EXIT_INPUT, format!("{file}: {e}")))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure(EXIT_INPUT, format!("{file}: not UTF-8")))?;
    let spec = parse_geometry(&text).map_err(|e| Failure(EXIT_INPUT, format!("{file}:{e}")))?;
    let g = Geometry::from_spec(&spec).map_err(|e| Failure(EXIT_INPUT, format!("{file}: {e}")))?;
    Ok(Input { bytes, spec, g })
}

fn symbol(inp: &Input, name: &str) -> Res<PolySymbol> {
    let d = inp.spec.symbol(name).ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
    Ok(PolySymbol::from_decl(inp.spec.dim, d))
}

fn hatted(inp: &Input, hat: Option<&str>) -> Res<Option<Geometry>> {
    let Some(text) = hat else { return Ok(None) };
    let f = parse_expr(text, &inp.spec).map_err(|e| Failure(EXIT_INPUT, format!("--hat-metric: {e}")))?;
    Ok(Some(inp.g.scaled(&f)?))
}

fn components(t: &TensorField) -> Vec<Component> {
    (0..t.components().len())
        .filter(|&off| !t.components()[off].is_zero())
        .map(|off| Component {
            index: unflatten(t.dim(), t.rank(), off).into_iter().map(|i| i + 1).collect(),
            value: t.components()[off].to_string(),
        })
        .collect()
}

/// Components with strictly increasing indices, for antisymmetric forms.
fn form_components(t: &TensorField) -> Vec<Component> {
    components(t).into_iter().filter(|c| c.index.windows(2).all(|w| w[0] < w[1])).collect()
}

fn variance(t: &TensorField) -> String {
    t.vars().iter().map(|v| if *v == Var::Up { '^' } else { '_' }).collect()
}

fn print_components(label: &str, cs: &[Component]) {
    if cs.is_empty() {
        println!("{label}: all components zero");
    }
    for c in cs {
        let ix: Vec<String> = c.index.iter().map(|i| i.to_string()).collect();
        println!("{label}[{}] = {}", ix.join(","), c.value);
    }
}

fn emit<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("report serializes"));
}

fn cmd_curvature(file: &str, kind: TensorKind, json: bool) -> Res<u8> {
    let inp = load(file)?;
    let g = &inp.g;
    let (name, t) = match kind {
        TensorKind::Christoffel => ("christoffel", curvature::christoffel(g).clone()),
        TensorKind::Riemann => ("riemann", curvature::riemann(g).clone()),
        TensorKind::Ricci => ("ricci", curvature::ricci(g).clone()),
        TensorKind::Scalar => ("scalar", TensorField::scalar(g.dim(), curvature::scalar(g).clone())),
        TensorKind::Schouten => ("schouten", curvature::schouten(g).0.clone()),
        TensorKind::Weyl => ("weyl", curvature::weyl(g).clone()),
        TensorKind::Cotton => ("cotton", curvature::cotton_york(g).clone()),
    };
    let cs = components(&t);
    if json {
        emit(&CurvatureReport {
            header: Header::new("curvature", &inp.bytes),
            tensor: name.into(),
            variance: variance(&t),
            components: cs,
        });
    } else {
        println!("# {name} ({})", variance(&t));
        print_components(name, &cs);
    }
    Ok(0)
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_classify(
    file: &str,
    sym: &str,
    vector: Option<&str>,
    potential: Option<&str>,
    hat: Option<&str>,
    json: bool,
) -> Res<u8> {
    let inp = load(file)?;
    let k = symbol(&inp, sym)?;
    if k.degree() != 2 {
        return Err(Failure(EXIT_INPUT, format!("symbol '{sym}' has degree {}, expected 2", k.degree())));
    }
    let x = vector.map(|v| symbol(&inp, v)).transpose()?;
    let f = match potential {
        Some(p) => Some(
            inp.spec
                .scalar(p)
                .cloned()
                .ok_or_else(|| Error::UnknownSymbol(p.to_string()))?,
        ),
        None => None,
    };
    let gh = hatted(&inp, hat)?;
    let rep = classify(&inp.g, &k, x.as_ref(), f.as_ref(), gh.as_ref())?;
    let out = classify_report(&inp, sym, vector, hat, &rep);
    if json {
        emit(&out);
    } else {
        print_classify(&out);
    }
    Ok(0)
}

fn classify_report(inp: &Input, sym: &str, vector: Option<&str>, hat: Option<&str>, rep: &ObsReport) -> ClassifyReport {
    ClassifyReport {
        header: Header::new("classify", &inp.bytes),
        symbol: sym.into(),
        vector: vector.map(String::from),
        hat_metric: hat.map(String::from),
        verdict: rep.verdict.as_str().into(),
        killing: rep.killing,
        conformal_killing: rep.conformal_killing,
        vector_killing: rep.vector_killing,
        vector_conformal_killing: rep.vector_conformal_killing,
        obs: rep.obs.to_poly_string(),
        obs_flat: components(&rep.obs_flat),
        d_obs: form_components(&rep.d_obs),
        potential: rep.potential.as_ref().map(|e| e.to_string()),
        potential_supplied: rep.potential_supplied,
        ansatz_exhausted: rep.ansatz_exhausted,
        potential_residual: rep.potential_residual.as_ref().map(components),
        operator: rep.operator.as_ref().map(|o| o.to_string()),
        operator_residual: rep
            .operator_residual
            .as_ref()
            .map(|o| if o.is_zero() { "0".into() } else { o.to_string() }),
        lm_divergence_coeff: rep.lm_divergence_coeff.to_string(),
    }
}

fn print_classify(r: &ClassifyReport) {
    println!("verdict: {}", r.verdict);
    println!("Killing: {}", yes(r.killing));
    println!("conformal Killing: {}", yes(r.conformal_killing));
    if let (Some(v), Some(kv), Some(ckv)) = (&r.vector, r.vector_killing, r.vector_conformal_killing) {
        println!("{v}: Killing {}, conformal Killing {}", yes(kv), yes(ckv));
    }
    if let Some(h) = &r.hat_metric {
        println!("obstruction computed for ({h})*g");
    }
    println!("Obs = {}", r.obs);
    print_components("Obs^flat", &r.obs_flat);
    print_components("d(Obs^flat)", &r.d_obs);
    match (&r.potential, r.ansatz_exhausted) {
        (Some(f), _) => println!("f = {f}{}", if r.potential_supplied { " (supplied)" } else { "" }),
        (None, true) => println!("f: not found by the curvature ansatz"),
        (None, false) => {}
    }
    if let Some(res) = &r.potential_residual {
        print_components("Obs^flat + 2 df", res);
    }
    if let Some(op) = &r.operator {
        println!("D = {op}");
    }
    if let Some(res) = &r.operator_residual {
        println!("Delta_Y o D - D' o Delta_Y = {res}");
    }
    println!("degree-1 coefficient at (lambda0, mu0): {}", r.lm_divergence_coeff);
}

fn cmd_obs(file: &str, sym: &str, hat: Option<&str>, json: bool) -> Res<u8> {
    let inp = load(file)?;
    let k = symbol(&inp, sym)?;
    let gh = hatted(&inp, hat)?;
    let g = gh.as_ref().unwrap_or(&inp.g);
    let o = obs(g, &k)?;
    let w = flat(g, &o);
    let dw = exterior_d(g, &w)?;
    let out = ObsOnlyReport {
        header: Header::new("obs", &inp.bytes),
        symbol: sym.into(),
        hat_metric: hat.map(String::from),
        obs: o.to_poly_string(),
        obs_flat: components(&w),
        d_obs: form_components(&dw),
    };
    if json {
        emit(&out);
    } else {
        println!("Obs = {}", out.obs);
        print_components("Obs^flat", &out.obs_flat);
        print_components("d(Obs^flat)", &out.d_obs);
    }
    Ok(0)
}

fn suite_input_bytes() -> Vec<u8> {
    suite::FIXTURES
        .iter()
        .flat_map(|n| suite::fixture_text(n).unwrap_or_default().bytes())
        .collect()
}

fn cmd_suite(mode: Mode, filter: Option<&str>, json: bool, timings: bool) -> Res<u8> {
    let re = filter
        .map(regex::Regex::new)
        .transpose()
        .map_err(|e| Failure(EXIT_INPUT, format!("--filter: {e}")))?;
    let recs = suite::run_suite(re.as_ref(), mode);
    let failures = recs.iter().filter(|r| r.is_failure()).count();
    let verdicts = recs.iter().filter(|r| matches!(r.status, Status::Verdict(_))).count();
    let summary = Summary {
        checks: recs.len(),
        pass: recs.iter().filter(|r| r.status == Status::Pass).count(),
        fail: failures,
        verdict: verdicts,
    };
    if json {
        let (mode_s, seed, points, tol) = match mode {
            Mode::Symbolic => ("symbolic", None, None, None),
            Mode::Numeric { seed, points, tol } => ("numeric", Some(seed), Some(points), Some(tol)),
        };
        emit(&SuiteReport {
            header: Header::new("paper-suite", &suite_input_bytes()),
            mode: mode_s.into(),
            seed,
            points,
            tol,
            filter: filter.map(String::from),
            checks: recs.iter().map(|r| entry(r, timings)).collect(),
            summary,
        });
    } else {
        for r in &recs {
            println!("{:<46} {:<24} {:>7} ms  {}", r.name, r.status.as_string(), r.wall_ms, r.residual);
            if let Some(n) = &r.note {
                println!("{:<46} note: {n}", "");
            }
        }
        println!(
            "\n{} checks: {} pass, {} verdict, {} fail",
            summary.checks, summary.pass, summary.verdict, summary.fail
        );
    }
    Ok(if failures > 0 { EXIT_FAIL } else { 0 })
}

fn entry(r: &CheckRecord, timings: bool) -> CheckEntry {
    CheckEntry {
        name: r.name.clone(),
        criterion: r.criterion,
        status: r.status.as_string(),
        residual: r.residual.clone(),
        claims: r.claims,
        failed: r.failed.clone(),
        note: r.note.clone(),
        wall_ms: timings.then_some(r.wall_ms),
    }
}
