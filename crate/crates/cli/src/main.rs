//! `dcol` — simulator for online learning against distributionally
//! constrained adversaries on finite atomic domains.
//!
//! Subcommands:
//!   certify     construct and verify a smoothness certificate
//!   fragment    compute an epsilon-fragmentation witness
//!   simulate    run a seeded Monte-Carlo regret experiment
//!   lowerbound  run a lower-bound adversary experiment
//!   report      convert a report to CSV or plot data
//!   private     run exponential-mechanism accuracy trials

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dcol_core::dimension::vc_dimension;
use dcol_core::harness::{
    report_from_json, report_to_csv, report_to_json, report_to_plotdata, run_experiment,
    ExperimentConfig,
};
use dcol_core::instance::{load_instance, Instance};
use dcol_core::learner::make_hedge_cover_learner;
use dcol_core::privacy::{exp_mech_learn, private_sample_size, MechanismSpec};
use dcol_core::profile::Exactness;
use dcol_core::protocol::derive_seed3;
use dcol_core::smoothness::{construct_certificate, fragmentation_number, SearchMode};
use dcol_core::space::Subset;

#[derive(Parser)]
#[command(name = "dcol", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a smoothness certificate for the instance's family and
    /// verify it exhaustively.
    Certify {
        #[arg(long)]
        instance: PathBuf,
        /// Decreasing scales, e.g. 0.5,0.25,0.125
        #[arg(long, value_delimiter = ',')]
        eps_seq: Vec<f64>,
        /// Write the certificate here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute an epsilon-fragmentation witness for the instance's family.
    Fragment {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a lower-bound experiment (threshold-hiding or fragmentation
    /// adversary configs only).
    Lowerbound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a JSON report to CSV rows or plot triples.
    Report {
        #[arg(long, value_name = "REPORT")]
        r#in: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Exponential-mechanism accuracy trials over a uniform cover,
    /// emitting a CSV of (trial, excess_error, sampled_hypothesis).
    Private {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        trials: usize,
        /// Hypothesis family name (defaults to the instance's first).
        #[arg(long)]
        family: Option<String>,
        /// Certificate scales; defaults to the instance base's profile.
        #[arg(long, value_delimiter = ',')]
        eps_seq: Vec<f64>,
        /// Family member index for the data marginal.
        #[arg(long, default_value_t = 0)]
        member: usize,
        /// Index of the labelling hypothesis.
        #[arg(long, default_value_t = 0)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Exact,
    Greedy,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Plotdata,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Certify {
            instance,
            eps_seq,
            out,
        } => certify(&instance, &eps_seq, out),
        Command::Fragment {
            instance,
            eps,
            mode,
            out,
        } => fragment(&instance, eps, mode, out),
        Command::Simulate { config, out } => simulate(&config, out, false),
        Command::Lowerbound { config, out } => simulate(&config, out, true),
        Command::Report { r#in, format } => report(&r#in, format),
        Command::Private {
            instance,
            alpha,
            eps,
            delta,
            trials,
            family,
            eps_seq,
            member,
            target,
            seed,
            out,
        } => private(
            &instance, alpha, eps, delta, trials, family, &eps_seq, member, target, seed, out,
        ),
    }
}

fn emit(out: Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct CertificateOut {
    verified: bool,
    witness: Option<Vec<usize>>,
    base_probs: Vec<String>,
    profile_steps: Vec<(String, String)>,
    well_behaved: bool,
    scales: Vec<ScaleOut>,
}

#[derive(Serialize)]
struct ScaleOut {
    eps: String,
    iterations: usize,
    c_raw: String,
    c_used: String,
    delta: String,
}

fn certify(instance: &PathBuf, eps_seq: &[f64], out: Option<PathBuf>) -> Result<()> {
    let inst = load_instance(instance)?;
    let build = construct_certificate(&inst.family, eps_seq)?;
    let cert = &build.certificate;
    let doc = CertificateOut {
        verified: cert.verified,
        witness: cert.witness.map(|w| w.atoms().collect()),
        base_probs: cert.base.probs().iter().map(|p| format!("{p}")).collect(),
        profile_steps: cert
            .profile
            .breakpoints()
            .iter()
            .map(|(z, v)| (format!("{z}"), format!("{v}")))
            .collect(),
        well_behaved: cert.profile.well_behaved(),
        scales: build
            .scales
            .iter()
            .map(|s| ScaleOut {
                eps: format!("{}", s.eps),
                iterations: s.selected.len(),
                c_raw: format!("{}", s.c_raw),
                c_used: format!("{}", s.c_used),
                delta: format!("{}", s.delta),
            })
            .collect(),
    };
    emit(out, &toml::to_string_pretty(&doc)?)
}

#[derive(Serialize)]
struct FragmentOut {
    eps: String,
    count: usize,
    exact: bool,
    parts: Vec<PartOut>,
}

#[derive(Serialize)]
struct PartOut {
    atoms: Vec<usize>,
    witness_member: usize,
    mass: String,
}

fn fragment(instance: &PathBuf, eps: f64, mode: Mode, out: Option<PathBuf>) -> Result<()> {
    let inst = load_instance(instance)?;
    let mode = match mode {
        Mode::Exact => SearchMode::Exact,
        Mode::Greedy => SearchMode::Greedy,
    };
    let w = fragmentation_number(&inst.family, eps, mode)?;
    let doc = FragmentOut {
        eps: format!("{eps}"),
        count: w.count,
        exact: w.exactness == Exactness::Exact,
        parts: w
            .parts
            .iter()
            .zip(&w.witnesses)
            .map(|(p, &m)| PartOut {
                atoms: p.atoms().collect(),
                witness_member: m,
                mass: format!("{}", inst.family.member(m).mass(*p)),
            })
            .collect(),
    };
    emit(out, &toml::to_string_pretty(&doc)?)
}

fn simulate(config_path: &PathBuf, out: Option<PathBuf>, lower_bound_only: bool) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    if lower_bound_only && !config.adversary.is_lower_bound() {
        bail!("lowerbound requires a threshold-hiding or fragmentation-lb adversary");
    }
    let report = run_experiment(&config)?;
    let json = report_to_json(&report)?;
    let target = out.or_else(|| config.output.as_ref().map(PathBuf::from));
    for s in &report.per_horizon {
        eprintln!(
            "T={:6}  mean regret {:10.4} +- {:.4}  (expected {:10.4} +- {:.4})",
            s.t, s.mean_regret, s.stderr_regret, s.mean_expected_regret, s.stderr_expected_regret
        );
    }
    if let Some(slope) = report.slope {
        eprintln!("log-log slope: {slope:.4}");
    }
    emit(target, &(json + "\n"))
}

fn report(path: &PathBuf, format: Format) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = report_from_json(&text)?;
    let out = match format {
        Format::Csv => report_to_csv(&report),
        Format::Plotdata => report_to_plotdata(&report),
    };
    print!("{out}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn private(
    instance: &PathBuf,
    alpha: f64,
    eps: f64,
    delta: f64,
    trials: usize,
    family: Option<String>,
    eps_seq: &[f64],
    member: usize,
    target: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let inst = load_instance(instance)?;
    let h = match &family {
        Some(name) => inst.hypothesis_family(name)?.clone(),
        None => {
            let Some((_, f)) = inst.hypothesis_families.first() else {
                bail!("instance has no hypothesis family");
            };
            f.clone()
        }
    };
    if member >= inst.family.len() || target >= h.len() {
        bail!("member or target index out of range");
    }
    let (base, profile) = certificate_parts(&inst, eps_seq)?;
    let build = make_hedge_cover_learner(&h, &base, &profile, eps, 1)?;
    let cover = match &build.learner {
        dcol_core::learner::Learner::HedgeCover(hl) => hl.cover().clone(),
        _ => unreachable!(),
    };
    let d = vc_dimension(&h, h.space().atom_count().min(10))?.max(1);
    let m = private_sample_size(d, eps, delta, alpha, build.delta);
    eprintln!(
        "cover size {} at scale {}; d = {d}; m = {m} samples per trial",
        cover.len(),
        build.delta
    );

    let spec = MechanismSpec::exponential(cover.clone(), alpha)?;
    let marginal = inst.family.member(member);
    let truth = h.member(target);
    let loss = |hyp: Subset| -> f64 {
        (0..inst.space.atom_count())
            .map(|x| {
                if hyp.contains(x) != truth.contains(x) {
                    marginal.prob(x)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let best: f64 = h
        .members()
        .iter()
        .map(|&g| loss(g))
        .fold(f64::INFINITY, f64::min);

    let mut csv = String::from("trial,excess_error,sampled_hypothesis\n");
    use dcol_core::privacy::LabeledDataset;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(derive_seed3(seed, 0, 0));
    use rand::Rng;
    for trial in 0..trials {
        let examples: Vec<(usize, bool)> = (0..m)
            .map(|_| {
                let x = marginal.sample(&mut rng);
                (x, truth.contains(x))
            })
            .collect();
        let data = LabeledDataset::new(examples);
        let pick = exp_mech_learn(&spec, &data, rng.gen());
        let excess = loss(cover.member(pick)) - best;
        csv.push_str(&format!("{trial},{excess},{pick}\n"));
    }
    emit(out, &csv)
}

fn certificate_parts(
    inst: &Instance,
    eps_seq: &[f64],
) -> Result<(
    dcol_core::space::Distribution,
    dcol_core::profile::ToleranceProfile,
)> {
    if eps_seq.is_empty() {
        let base = inst
            .base
            .clone()
            .context("instance has no [base]; pass --eps-seq to construct a certificate")?;
        let mut grid = base.all_subset_masses()?;
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let profile = dcol_core::smoothness::tolerance_profile(&inst.family, &base, &grid)?;
        Ok((base, profile))
    } else {
        let build = construct_certificate(&inst.family, eps_seq)?;
        if !build.certificate.verified {
            bail!("constructed certificate failed verification");
        }
        Ok((build.certificate.base, build.certificate.profile))
    }
}
