use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use vdecomp::configspace::{check_family, default_family};
use vdecomp::interaction::{conserved_basis, is_simple, labeled, validate_interaction, InteractionTable};
use vdecomp::locale::{box_counts, counting_report, tempered_limit, tempered_ratio, Locale};
use vdecomp::measure::{expand_base, expand_mu, SiteMeasure};
use vdecomp::spectral::{
    spectral_gap, verify_boundary_estimate, verify_dagger_bound, verify_mpl, verify_sigma_gap_bound, InequalityReport,
};
use vdecomp::varadhan::{current_form, psi_sequence, table_from_json, table_to_json, Decomposer, ShiftInvariantForm};
use vdecomp::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Largest box enumerated by `counts` for the perimeter inequalities.
const COUNTING_LIMIT: u128 = 1 << 20;

#[derive(Parser)]
#[command(name = "vdecomp", version, about = "Conserved quantities, spectral gaps and closed-form decompositions for lattice interactions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest configuration space any single step may enumerate.
    #[arg(long, global = true, default_value_t = 1 << 22, value_parser = parse_budget)]
    budget: u128,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Basis of conserved quantities.
    Consv {
        #[arg(long)]
        interaction: String,
    },
    /// Whether every class of equal conserved sums is one transition component.
    Irreducible {
        #[arg(long)]
        interaction: String,
        #[arg(long, value_delimiter = ',')]
        locales: Option<Vec<String>>,
    },
    /// Spectral gaps per locale as CSV.
    Gap {
        #[arg(long)]
        interaction: String,
        #[arg(long, default_value = "uniform")]
        measure: String,
        #[arg(long, value_delimiter = ',', required = true)]
        locales: Vec<String>,
    },
    /// Checks one of the norm inequalities on random functions.
    Verify {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long)]
        interaction: String,
        #[arg(long, default_value = "uniform")]
        measure: String,
        /// Ambient locale.
        #[arg(long, default_value = "p4")]
        locale: String,
        /// Vertex indices of the inner set, for `be` and `dagger`.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        inner: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Exact-support expansion of a local function.
    Expand {
        /// Table JSON with `d`, `nstates`, `sites`, `values`.
        #[arg(long)]
        function: PathBuf,
        #[arg(long, value_enum, default_value_t = Flavor::Mu)]
        flavor: Flavor,
        #[arg(long, default_value = "uniform")]
        measure: String,
        /// Base state for the `base` flavor.
        #[arg(long, default_value_t = 0)]
        base: usize,
    },
    /// Splits a shift-invariant closed form into currents and an exact part.
    Decompose {
        #[arg(long)]
        interaction: String,
        #[arg(long, default_value = "uniform")]
        measure: String,
        #[arg(long)]
        omega: PathBuf,
        #[arg(long, default_value_t = 2)]
        radius: usize,
    },
    /// One step of the box-averaged potential sequence.
    Psi {
        #[arg(long)]
        interaction: String,
        #[arg(long, default_value = "uniform")]
        measure: String,
        /// Form JSON; exclusive with `--current`.
        #[arg(long, conflicts_with = "current")]
        omega: Option<PathBuf>,
        /// `i:j`: current of the i-th conserved quantity in direction j.
        #[arg(long)]
        current: Option<String>,
        /// Lattice dimension for `--current`.
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Boundary constant; scanned from complete graphs when absent.
        #[arg(long)]
        constant: Option<f64>,
    },
    /// Box, boundary and perimeter counts on the lattice.
    Counts {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        ells: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Mpl,
    Be,
    Sg,
    Dagger,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Flavor {
    Mu,
    Base,
}

/// Outcome of a subcommand that ran to completion.
struct Report {
    body: String,
    violated: bool,
}

impl Report {
    fn json(v: &Value, violated: bool) -> anyhow::Result<Self> {
        Ok(Self { body: serde_json::to_string_pretty(v)? + "\n", violated })
    }
}

fn parse_budget(s: &str) -> Result<u128, String> {
    let b: u128 = match s.strip_prefix("2^") {
        Some(p) => 1u128.checked_shl(p.parse::<u32>().map_err(|e| e.to_string())?).ok_or("exponent too large")?,
        None => s.parse().map_err(|e: std::num::ParseIntError| e.to_string())?,
    };
    if b == 0 {
        return Err("budget must be positive".into());
    }
    Ok(b)
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_interaction(spec: &str) -> anyhow::Result<InteractionTable> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(InteractionTable::from_json(&read(path)?)?);
    }
    InteractionTable::from_name(spec)
        .ok_or_else(|| anyhow!("interaction {spec:?} is neither a file nor one of sep:k, gep:k, identity:k"))
}

fn load_measure(spec: &str, nstates: usize) -> anyhow::Result<SiteMeasure> {
    let path = Path::new(spec);
    let nu = if path.is_file() { SiteMeasure::from_json(&read(path)?)? } else { SiteMeasure::from_name(spec, nstates)? };
    if nu.nstates() != nstates {
        bail!(Error::Invalid(format!("measure has {} states, interaction has {nstates}", nu.nstates())));
    }
    Ok(nu)
}

/// Expands `p2`, `box2x2`, ranges like `k2..k6`, and JSON locale files.
fn load_locales(specs: &[String]) -> anyhow::Result<Vec<Locale>> {
    let specs: Vec<&str> = specs.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if specs.is_empty() {
        bail!(Error::Invalid("empty locale list".into()));
    }
    let mut out = Vec::new();
    for spec in specs {
        out.extend(load_locale_spec(spec)?);
    }
    Ok(out)
}

fn load_locale_spec(spec: &str) -> anyhow::Result<Vec<Locale>> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(vec![Locale::from_json(&read(path)?)?]);
    }
    if let Some((lo, hi)) = spec.split_once("..") {
        let kind = &lo[..1.min(lo.len())];
        let hi = hi.strip_prefix(kind).unwrap_or(hi);
        let (a, b): (usize, usize) = match (lo[kind.len()..].parse(), hi.parse()) {
            (Ok(a), Ok(b)) if a <= b => (a, b),
            _ => bail!(Error::Invalid(format!("bad locale range {spec:?}"))),
        };
        return (a..=b).map(|k| named_locale(&format!("{kind}{k}"))).collect();
    }
    Ok(vec![named_locale(spec)?])
}

fn named_locale(name: &str) -> anyhow::Result<Locale> {
    Locale::from_name(name).ok_or_else(|| anyhow!(Error::Invalid(format!("unknown locale {name:?}"))))
}

fn load_form(path: &Path, phi: &InteractionTable) -> anyhow::Result<ShiftInvariantForm> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(ShiftInvariantForm::from_json(&v, phi)?)
}

fn consv(interaction: &str) -> anyhow::Result<Report> {
    let phi = load_interaction(interaction)?;
    let basis = conserved_basis(&phi);
    let named: Vec<_> = basis.vectors().iter().map(|xi| labeled(&phi, xi)).collect();
    let validation = validate_interaction(&phi);
    Report::json(
        &json!({
            "states": phi.space().labels(),
            "dimension": basis.dim(),
            "basis": named,
            "simple": is_simple(&phi),
            "valid": validation.is_valid(),
        }),
        !validation.is_valid(),
    )
}

fn irreducible(g: &Global, interaction: &str, locales: Option<&[String]>) -> anyhow::Result<Report> {
    let phi = load_interaction(interaction)?;
    let family = match locales {
        Some(l) => load_locales(l)?,
        None => default_family(),
    };
    let report = check_family(&phi, &family, g.budget)?;
    Report::json(&serde_json::to_value(&report)?, !report.all_connected)
}

fn gap(g: &Global, interaction: &str, measure: &str, locales: &[String]) -> anyhow::Result<Report> {
    let phi = load_interaction(interaction)?;
    let nu = load_measure(measure, phi.num_states())?;
    let locales = load_locales(locales)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["locale", "vertices", "gap", "normalized", "running_min", "residual", "degenerate"])?;
    let mut running = f64::INFINITY;
    let mut violated = false;
    for loc in &locales {
        let r = spectral_gap(loc, &phi, &nu, None, g.budget)?;
        running = running.min(r.normalized);
        violated |= !(r.gap > 0.0) || r.residual > 1e-8;
        w.write_record([
            r.locale.clone(),
            r.vertices.to_string(),
            r.gap.to_string(),
            r.normalized.to_string(),
            running.to_string(),
            r.residual.to_string(),
            r.degenerate.to_string(),
        ])?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    Ok(Report { body, violated })
}

fn verify(g: &Global, args: (Lemma, &str, &str, &str, &[usize], usize)) -> anyhow::Result<Report> {
    let (lemma, interaction, measure, locale, inner, trials) = args;
    let phi = load_interaction(interaction)?;
    let nu = load_measure(measure, phi.num_states())?;
    let sigma = load_locale_spec(locale)?.into_iter().next().unwrap();
    let lambda = inner
        .iter()
        .map(|&i| {
            sigma.sites().get(i).copied().ok_or_else(|| anyhow!(Error::Invalid(format!("vertex {i} not in {}", sigma.name()))))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report: InequalityReport = match lemma {
        Lemma::Mpl => verify_mpl(&sigma, &phi, &nu, trials, g.seed, g.budget)?,
        Lemma::Be => verify_boundary_estimate(&sigma, &lambda, &phi, &nu, trials, g.seed, g.budget)?,
        Lemma::Sg => verify_sigma_gap_bound(&sigma, &phi, &nu, trials, g.seed, g.budget)?,
        Lemma::Dagger => verify_dagger_bound(&sigma, &lambda, &phi, &nu, trials, g.seed, g.budget)?,
    };
    Report::json(&serde_json::to_value(&report)?, !report.pass)
}

fn expand(function: &Path, flavor: Flavor, measure: &str, base: usize) -> anyhow::Result<Report> {
    let v: Value = serde_json::from_str(&read(function)?).map_err(|e| Error::Parse(e.to_string()))?;
    let field = |k: &str| v.get(k).and_then(Value::as_u64).ok_or_else(|| Error::Parse(format!("missing integer field {k:?}")));
    let d = field("d")? as usize;
    let nstates = field("nstates")? as usize;
    let f = table_from_json(&v, d, nstates)?;
    let pieces = match flavor {
        Flavor::Mu => expand_mu(&f, &load_measure(measure, nstates)?),
        Flavor::Base => {
            if base >= nstates {
                bail!(Error::Invalid(format!("base state {base} out of range")));
            }
            expand_base(&f, base)
        }
    };
    let error = pieces.reconstruct().max_diff(&f);
    let list: Vec<Value> = pieces.pieces().values().map(|t| table_to_json(t, d)).collect();
    Report::json(
        &json!({
            "flavor": if flavor == Flavor::Mu { "mu" } else { "base" },
            "pieces": list,
            "reconstruction_error": error,
        }),
        !(error <= 1e-10),
    )
}

fn decompose(interaction: &str, measure: &str, omega: &Path, radius: usize) -> anyhow::Result<Report> {
    let phi = load_interaction(interaction)?;
    let nu = load_measure(measure, phi.num_states())?;
    let w = load_form(omega, &phi)?;
    let basis = conserved_basis(&phi);
    let res = Decomposer::new(&phi, &basis, &nu, w.dim(), radius)?.decompose(&w)?;
    Report::json(&res.to_json(w.dim()), false)
}

struct PsiArgs<'a> {
    interaction: &'a str,
    measure: &'a str,
    omega: Option<&'a Path>,
    current: Option<&'a str>,
    d: usize,
    n: usize,
    constant: Option<f64>,
}

fn psi(g: &Global, a: PsiArgs) -> anyhow::Result<Report> {
    let phi = load_interaction(a.interaction)?;
    let nu = load_measure(a.measure, phi.num_states())?;
    let w = match (a.omega, a.current) {
        (Some(p), _) => load_form(p, &phi)?,
        (None, Some(c)) => {
            let (i, j) = c
                .split_once(':')
                .and_then(|(i, j)| Some((i.trim().parse::<usize>().ok()?, j.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| anyhow!(Error::Invalid(format!("--current expects i:j, got {c:?}"))))?;
            let basis = conserved_basis(&phi);
            if i >= basis.dim() || j >= a.d {
                bail!(Error::Invalid(format!("current {i}:{j} out of range")));
            }
            current_form(&phi, &basis.vector_f64(i), j, a.d)?
        }
        (None, None) => bail!(Error::Invalid("one of --omega or --current is required".into())),
    };
    let step = psi_sequence(&w, a.n, &nu, a.constant, g.budget)?;
    let ok = step.identity_error <= 1e-10 && step.bound.pass;
    Report::json(&step.to_json(), !ok)
}

fn counts(d: usize, n: u64, ells: &[usize]) -> anyhow::Result<Report> {
    if !(1..=3).contains(&d) {
        bail!(Error::Invalid(format!("dimension {d} outside 1..=3")));
    }
    let (size, boundary) = box_counts(d, n);
    let ratio = tempered_ratio(d, n);
    let limit = tempered_limit(d);
    let report = (size <= COUNTING_LIMIT).then(|| counting_report(d, n as usize, ells));
    let enumerated = report.as_ref().map(|r| {
        json!({
            "box_size": r.box_size,
            "boundary_size": r.boundary_size,
            "degree": r.degree,
            "perimeters": r.perimeters,
            "boundary_bounds_hold": r.boundary_bounds_hold,
            "perimeter_bounds_hold": r.perimeter_bounds_hold,
        })
    });
    let violated = report.as_ref().is_some_and(|r| !r.all_hold() || r.box_size as u128 != size || r.boundary_size as u128 != boundary);
    Report::json(
        &json!({
            "d": d,
            "n": n,
            "box_size": size.to_string(),
            "boundary_size": boundary.to_string(),
            "tempered_ratio": ratio,
            "tempered_limit": limit,
            "relative_difference": (ratio - limit).abs() / limit,
            "enumerated": enumerated,
        }),
        violated,
    )
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let g = &cli.global;
    match &cli.command {
        Command::Consv { interaction } => consv(interaction),
        Command::Irreducible { interaction, locales } => irreducible(g, interaction, locales.as_deref()),
        Command::Gap { interaction, measure, locales } => gap(g, interaction, measure, locales),
        Command::Verify { lemma, interaction, measure, locale, inner, trials } => {
            verify(g, (*lemma, interaction, measure, locale, inner, *trials))
        }
        Command::Expand { function, flavor, measure, base } => expand(function, *flavor, measure, *base),
        Command::Decompose { interaction, measure, omega, radius } => decompose(interaction, measure, omega, *radius),
        Command::Psi { interaction, measure, omega, current, d, n, constant } => psi(
            g,
            PsiArgs {
                interaction,
                measure,
                omega: omega.as_deref(),
                current: current.as_deref(),
                d: *d,
                n: *n,
                constant: *constant,
            },
        ),
        Command::Counts { d, n, ells } => counts(*d, *n, ells),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
        Some(
            Error::NotClosed(_)
            | Error::NotIrreduciblyQuantified(_)
            | Error::DegenerateDenominator
            | Error::IllConditioned(_)
            | Error::NotNormalized(_),
        ) => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|report| {
        match &cli.global.out {
            Some(path) => fs::write(path, &report.body).with_context(|| format!("writing {}", path.display()))?,
            None => std::io::stdout().write_all(report.body.as_bytes())?,
        }
        Ok(report.violated)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("vdecomp: invariant violated, see report");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(e) => {
            eprintln!("vdecomp: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
