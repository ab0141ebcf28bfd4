//! Experiment CLI: paired-run reproducibility estimates, parameter sweeps,
//! and CSV/JSON emission for every algorithm in the library.
//!
//! Exit codes: 0 on success, 2 when a command's acceptance gate fails,
//! 1 on error. Reruns with identical flags and seed produce byte-identical
//! output.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use replearn::boost::{strong_halfspace_learner, StrongLearnerConfig};
use replearn::dist::{CoinSource, DiscreteSource, MarginHalfspaceSource};
use replearn::halfspace::{advantage, r_halfspace_wkl, WklParams};
use replearn::heavy::{hh_sample_sizes, r_heavy_hitters, HhParams};
use replearn::median::{
    is_approximate_median, median_plan, median_sample_size, r_median_traced, MedianParams,
    MedianSizes, SizeMode,
};
use replearn::meta::{
    amplify, data_reuse_tv, generalization_check, AlgorithmHandle, AmplifySizes, DataReuseConfig,
};
use replearn::report::{
    clopper_pearson, coin_scaling_fit, coin_scaling_sweep, estimate_reproducibility, map_trials,
    sweep_rows_to_csv, PairedRunSpec, ReproReport,
};
use replearn::rounding::{BoxScheme, FoamScheme, SchemeKind, FOAM_DEFAULT_MAX_STAGES};
use replearn::sq::{rstat, rstat_sample_size, SqParams, SqQuery};
use replearn::{RandomStream, Result as CoreResult};

#[derive(Parser)]
#[command(name = "replearn", version, about = "Reproducible learning experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Root seed for all randomness (data and algorithm streams).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Monte-Carlo trials.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Paired-run estimate for the reproducible statistical-query oracle on
    /// a biased coin.
    Rstat(RstatArgs),
    /// Reproducible heavy hitters over a CSV-specified pmf.
    Heavy(HeavyArgs),
    /// Reproducible approximate median over a d-bit domain.
    Median(MedianArgs),
    /// Reproducible halfspace weak learner (foam or box rounding).
    Wkl(WklArgs),
    /// Smooth reproducible boosting of the halfspace weak learner.
    Boost(BoostArgs),
    /// Reproducibility amplification of a toy majority algorithm.
    Amplify(AmplifyArgs),
    /// Adaptive data-reuse transcript experiment (exact enumeration).
    Reuse(ReuseArgs),
    /// Generalization-bound violation rate of the weak learner.
    GenCheck(GenCheckArgs),
    /// Coin-problem scaling sweep and log-log exponent fit.
    CoinSweep(CoinSweepArgs),
    /// Foam vs box rounding disagreement curves.
    FoamsProbe(FoamsProbeArgs),
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Rstat(a) => cmd_rstat(a),
        Command::Heavy(a) => cmd_heavy(a),
        Command::Median(a) => cmd_median(a),
        Command::Wkl(a) => cmd_wkl(a),
        Command::Boost(a) => cmd_boost(a),
        Command::Amplify(a) => cmd_amplify(a),
        Command::Reuse(a) => cmd_reuse(a),
        Command::GenCheck(a) => cmd_gen_check(a),
        Command::CoinSweep(a) => cmd_coin_sweep(a),
        Command::FoamsProbe(a) => cmd_foams_probe(a),
    }
}

fn emit(common: &Common, text: &str) -> anyhow::Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text).context("writing output file")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn report_csv(r: &ReproReport, gate: bool) -> String {
    let mut out = String::from(
        "algorithm,trials,agreements,repro_rate,accuracy_rate,ci_lo,ci_hi,seed,gate_passed\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        r.algorithm,
        r.trials,
        r.agreements,
        r.repro_rate,
        r.accuracy_rate.map(|a| a.to_string()).unwrap_or_default(),
        r.ci95.0,
        r.ci95.1,
        r.seed,
        gate
    ));
    out
}

fn emit_report(common: &Common, mut report: ReproReport, gate: bool, params: serde_json::Value) -> anyhow::Result<bool> {
    report.params = params;
    let text = match common.format {
        Format::Json => {
            // ReproReport fields stay top-level; the gate rides alongside.
            let mut value = serde_json::to_value(&report)?;
            value
                .as_object_mut()
                .expect("report serializes to an object")
                .insert("gate_passed".into(), serde_json::Value::Bool(gate));
            serde_json::to_string_pretty(&value)?
        }
        Format::Csv => report_csv(&report, gate),
    };
    emit(common, &text)?;
    Ok(gate)
}

// ---------------------------------------------------------------- rstat

#[derive(Args, Debug)]
struct RstatArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long = "coin-bias", default_value_t = 0.5)]
    coin_bias: f64,
}

fn cmd_rstat(a: RstatArgs) -> anyhow::Result<bool> {
    let params = SqParams::new(a.tau, a.rho, a.delta)?;
    let n = rstat_sample_size(&params)?;
    let coin = CoinSource::new(a.coin_bias)?;
    let bias = a.coin_bias;
    let tau = a.tau;
    let spec = PairedRunSpec {
        name: "rstat".into(),
        run: Arc::new(move |data: &mut RandomStream, algo: &RandomStream| {
            let sample = coin.sample(n, data);
            let out = rstat(&SqQuery::new("identity", |b: &u8| *b as f64), &sample, &params, &mut algo.clone())?;
            Ok(out.to_bits())
        }),
        accurate: Some(Arc::new(move |out: &u64| (f64::from_bits(*out) - bias).abs() <= tau)),
    };
    let root = RandomStream::new(a.common.seed);
    let report = estimate_reproducibility(&spec, a.common.trials, &root);
    let gate = report.ci95.0 >= 1.0 - 1.2 * a.rho;
    let params_json = serde_json::json!({
        "tau": a.tau, "rho": a.rho, "delta": a.delta,
        "coin_bias": a.coin_bias, "sample_size": n,
    });
    emit_report(&a.common, report, gate, params_json)
}

// ---------------------------------------------------------------- heavy

#[derive(Args, Debug)]
struct HeavyArgs {
    #[command(flatten)]
    common: Common,
    /// Two-column CSV (index, probability).
    #[arg(long)]
    pmf: PathBuf,
    /// Domain bits (inferred from the file when omitted).
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 0.45)]
    v: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Desk-scale override of the candidate stage size.
    #[arg(long)]
    q1: Option<usize>,
    /// Desk-scale override of the estimation stage size.
    #[arg(long)]
    q2: Option<usize>,
}

fn infer_bits(path: &PathBuf) -> anyhow::Result<u32> {
    let text = std::fs::read_to_string(path)?;
    let max_idx = text
        .lines()
        .filter_map(|l| l.split(',').next()?.trim().parse::<u64>().ok())
        .max()
        .unwrap_or(1);
    Ok(((max_idx + 1) as f64).log2().ceil().max(1.0) as u32)
}

fn cmd_heavy(a: HeavyArgs) -> anyhow::Result<bool> {
    let bits = match a.bits {
        Some(b) => b,
        None => infer_bits(&a.pmf)?,
    };
    let source = DiscreteSource::from_csv(bits, &a.pmf)?;
    let p = HhParams::new(a.rho, a.v, a.eps)?;
    let (worst_case_q1, worst_case_q2) = hh_sample_sizes(&p)?;
    let q1 = a.q1.unwrap_or(worst_case_q1);
    let q2 = a.q2.unwrap_or(worst_case_q2);

    let root = RandomStream::new(a.common.seed);
    struct Trial {
        agreed: bool,
        exact: bool,
        set: Vec<u64>,
    }
    let outcomes = map_trials(a.common.trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let algo = t.derive("algo");
        let run = |data_label: &str| -> CoreResult<Vec<u64>> {
            let mut data = t.derive(data_label);
            let mut set: Vec<u64> = r_heavy_hitters(
                || Ok::<u64, replearn::Error>(source.draw(&mut data)),
                q1,
                q2,
                &p,
                &mut algo.clone(),
            )?
            .into_iter()
            .collect();
            set.sort_unstable();
            Ok(set)
        };
        let o1 = run("data1");
        let o2 = run("data2");
        // The cutoff is the shared stream's first draw; replay it for the
        // exact-answer oracle.
        let cutoff = a.v - a.eps + algo.clone().draw_unit() * (2.0 * a.eps);
        let exact_set: Vec<u64> = source
            .exact_pmf()
            .iter()
            .enumerate()
            .filter(|&(_, &mass)| mass >= cutoff)
            .map(|(x, _)| x as u64)
            .collect();
        match (o1, o2) {
            (Ok(s1), Ok(s2)) => {
                Trial { agreed: s1 == s2, exact: s1 == exact_set, set: s1 }
            }
            _ => Trial { agreed: false, exact: false, set: Vec::new() },
        }
    });
    let trials = a.common.trials;
    let agreements = outcomes.iter().filter(|o| o.agreed).count();
    let exact = outcomes.iter().filter(|o| o.exact).count();
    let ci = clopper_pearson(agreements, trials);
    let gate = ci.0 >= 1.0 - 1.2 * a.rho;
    let mut set_counts: Vec<(String, usize)> = {
        let mut m = std::collections::BTreeMap::new();
        for o in &outcomes {
            *m.entry(format!("{:?}", o.set)).or_insert(0) += 1;
        }
        m.into_iter().collect()
    };
    set_counts.sort();
    let body = serde_json::json!({
        "algorithm": "heavy",
        "trials": trials,
        "agreements": agreements,
        "repro_rate": agreements as f64 / trials as f64,
        "exact_rate": exact as f64 / trials as f64,
        "ci95": [ci.0, ci.1],
        "seed": a.common.seed,
        "params": { "rho": a.rho, "v": a.v, "eps": a.eps, "q1": q1, "q2": q2,
                    "worst_case_q1": worst_case_q1, "worst_case_q2": worst_case_q2, "bits": bits },
        "returned_sets": set_counts.iter().map(|(s, c)| serde_json::json!({"set": s, "count": c})).collect::<Vec<_>>(),
        "gate_passed": gate,
    });
    emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
    Ok(gate)
}

// ---------------------------------------------------------------- median

#[derive(Args, Debug)]
struct MedianArgs {
    #[command(flatten)]
    common: Common,
    /// Two-column CSV (index, probability); uniform when omitted.
    #[arg(long)]
    pmf: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    bits: u32,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    delta: f64,
    /// Scale factor on every subroutine sample size (1.0 = worst-case).
    #[arg(long, default_value_t = 1.0)]
    cscale: f64,
    /// Explicit per-subroutine sizes (overrides --cscale when all given).
    #[arg(long)]
    nm: Option<usize>,
    #[arg(long)]
    q1: Option<usize>,
    #[arg(long)]
    q2: Option<usize>,
    #[arg(long)]
    nsq: Option<usize>,
}

fn cmd_median(a: MedianArgs) -> anyhow::Result<bool> {
    let source = match &a.pmf {
        Some(path) => DiscreteSource::from_csv(a.bits, path)?,
        None => DiscreteSource::uniform(a.bits)?,
    };
    let sizes = match (a.nm, a.q1, a.q2, a.nsq) {
        (Some(n_m), Some(q1), Some(q2), Some(n_sq)) => {
            SizeMode::Explicit(MedianSizes { n_m, q1, q2, n_sq })
        }
        _ if a.cscale == 1.0 => SizeMode::WorstCase,
        _ => SizeMode::Scaled(a.cscale),
    };
    let params = MedianParams::new(a.rho, a.bits, a.tau, a.delta, sizes)?;
    let need = median_sample_size(&params)?;
    let plan = median_plan(&params)?;
    let root = RandomStream::new(a.common.seed);

    struct Trial {
        agreed: bool,
        valid: bool,
        structural: bool,
        depth_ok: bool,
        failure: Option<String>,
    }
    let log_star_bound = replearn::median::log_star((1u64 << a.bits) as f64) as usize;
    let outcomes = map_trials(a.common.trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let algo = t.derive("algo");
        let run = |label: &str| {
            let sample = source.sample(need, &mut t.derive(label));
            r_median_traced(&sample, &params, &algo)
        };
        match (run("data1"), run("data2")) {
            (Ok(t1), Ok(t2)) => Trial {
                agreed: t1.value == t2.value,
                valid: is_approximate_median(&source, t1.value, a.tau),
                structural: t1.value == t1.s0 || t1.value == t1.s1,
                depth_ok: t1.depth <= log_star_bound,
                failure: None,
            },
            (Err(e), _) | (_, Err(e)) => Trial {
                agreed: false,
                valid: false,
                structural: true,
                depth_ok: true,
                failure: Some(e.to_string()),
            },
        }
    });
    let trials = a.common.trials;
    let agreements = outcomes.iter().filter(|o| o.agreed).count();
    let valid = outcomes.iter().filter(|o| o.valid).count();
    let structural = outcomes.iter().all(|o| o.structural);
    let depth_ok = outcomes.iter().all(|o| o.depth_ok);
    let failures: Vec<String> =
        outcomes.iter().filter_map(|o| o.failure.clone()).collect();
    let ci = clopper_pearson(agreements, trials);
    let valid_rate = valid as f64 / trials as f64;
    let sigma = (valid_rate * (1.0 - valid_rate) / trials as f64).sqrt();
    let gate = valid_rate + 3.0 * sigma >= 1.0 - a.delta && structural && depth_ok;
    let body = serde_json::json!({
        "algorithm": "median",
        "trials": trials,
        "agreements": agreements,
        "repro_rate": agreements as f64 / trials as f64,
        "ci95": [ci.0, ci.1],
        "valid_rate": valid_rate,
        "structural_invariant": structural,
        "depth_within_log_star": depth_ok,
        "sample_size": need,
        "plan": plan,
        "failures": failures,
        "seed": a.common.seed,
        "params": { "rho": a.rho, "bits": a.bits, "tau": a.tau, "delta": a.delta, "cscale": a.cscale },
        "gate_passed": gate,
    });
    emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
    Ok(gate)
}

// ---------------------------------------------------------------- wkl

#[derive(Args, Debug)]
struct WklArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "box")]
    scheme: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.3)]
    margin: f64,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    /// Desk-scale sample size (worst-case when omitted).
    #[arg(long = "m-override")]
    m_override: Option<usize>,
}

fn cmd_wkl(a: WklArgs) -> anyhow::Result<bool> {
    let kind: SchemeKind = a.scheme.parse()?;
    let mut params = WklParams::new(a.rho, a.dim, a.margin, kind)?;
    if let Some(m) = a.m_override {
        params = params.with_m_override(m);
    }
    let worst_case = params.worst_case_m(kind);
    let m = match a.m_override {
        Some(m) => m,
        None if worst_case <= 1e7 => worst_case as usize,
        None => bail!(
            "worst-case sample size is {worst_case:.3e} per run; pass --m-override for a desk-scale experiment"
        ),
    };
    let dim = a.dim;
    let margin = a.margin;
    let spec = PairedRunSpec {
        name: "wkl".into(),
        run: Arc::new(move |data: &mut RandomStream, algo: &RandomStream| {
            // The hidden direction is part of the distribution, shared by
            // both runs of a pair (it is derived from the trial, not from
            // the per-run data stream).
            let src = MarginHalfspaceSource::with_random_direction(
                dim,
                margin,
                &mut algo.derive("dist"),
            )?;
            let sample = src.sample(m, data);
            let h = r_halfspace_wkl(&sample, &params, kind, &mut algo.clone())?;
            // Held-out advantage against the same distribution.
            let adv = advantage(&h, |s| src.draw(s), 2000, &mut data.derive("holdout"));
            Ok((h, adv >= margin / 4.0 - 0.05))
        }),
        accurate: Some(Arc::new(|out: &(replearn::halfspace::Hypothesis, bool)| out.1)),
    };
    let root = RandomStream::new(a.common.seed);
    let report = estimate_reproducibility(&spec, a.common.trials, &root);
    let budget = params.repro_budget(kind, m).min(1.0);
    let gate = report.ci95.0 >= 1.0 - (1.2 * budget).min(1.0);
    let params_json = serde_json::json!({
        "scheme": format!("{kind:?}"), "dim": a.dim, "margin": a.margin, "rho": a.rho,
        "m": m, "worst_case_m": params.worst_case_m(kind), "k": params.scaling_k(kind, m),
        "repro_budget": params.repro_budget(kind, m),
    });
    emit_report(&a.common, report, gate, params_json)
}

// ---------------------------------------------------------------- boost

#[derive(Args, Debug)]
struct BoostArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "box")]
    scheme: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.3)]
    margin: f64,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// Round-bound constant in T = ⌈c_T/(εγ²)⌉.
    #[arg(long, default_value_t = 4.0)]
    ct: f64,
    /// Per-round weak-learner sample size.
    #[arg(long = "m-wkl", default_value_t = 64)]
    m_wkl: usize,
    /// Termination-query sample size override.
    #[arg(long = "check-n", default_value_t = 2000)]
    check_n: usize,
    /// Override the booster's declared weak-learner advantage γ
    /// (τ/4 when omitted).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "holdout", default_value_t = 5000)]
    holdout: usize,
}

fn cmd_boost(a: BoostArgs) -> anyhow::Result<bool> {
    let kind: SchemeKind = a.scheme.parse()?;
    let cfg = StrongLearnerConfig {
        dim: a.dim,
        margin: a.margin,
        rho: a.rho,
        eps: a.eps,
        scheme: kind,
        c_t: a.ct,
        m_wkl: a.m_wkl,
        check_n: Some(a.check_n),
        slice_delta: 0.05,
        gamma_override: a.gamma,
    };
    let margin = a.margin;
    let dim = a.dim;
    let holdout = a.holdout;
    let root = RandomStream::new(a.common.seed);

    struct Trial {
        sequences_match: bool,
        err: f64,
        rounds: Vec<replearn::boost::BoostRound>,
        failure: Option<String>,
    }
    let outcomes = map_trials(a.common.trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let algo = t.derive("algo");
        let src = MarginHalfspaceSource::with_random_direction(dim, margin, &mut algo.derive("dist"))
            .expect("valid margin");
        let run = |label: &str| {
            strong_halfspace_learner(|s| src.draw(s), &cfg, t.derive(label), &algo)
        };
        match (run("data1"), run("data2")) {
            (Ok(r1), Ok(r2)) => {
                let fp1: Vec<u64> = r1.outcome.rounds.iter().map(|r| r.hypothesis_fingerprint).collect();
                let fp2: Vec<u64> = r2.outcome.rounds.iter().map(|r| r.hypothesis_fingerprint).collect();
                let mut test = t.derive("holdout");
                let err = (0..holdout)
                    .filter(|_| {
                        let ex = src.draw(&mut test);
                        r1.outcome.hypothesis.classify(&ex.x) != ex.y
                    })
                    .count() as f64
                    / holdout as f64;
                Trial { sequences_match: fp1 == fp2, err, rounds: r1.outcome.rounds, failure: None }
            }
            (Err(e), _) | (_, Err(e)) => Trial {
                sequences_match: false,
                err: 1.0,
                rounds: Vec::new(),
                failure: Some(e.to_string()),
            },
        }
    });
    let trials = a.common.trials;
    let seq_match = outcomes.iter().filter(|o| o.sequences_match).count();
    let err_ok = outcomes.iter().filter(|o| o.err <= a.eps).count();
    let failures: Vec<String> = outcomes.iter().filter_map(|o| o.failure.clone()).collect();
    let ci = clopper_pearson(seq_match, trials);
    let gate = (err_ok as f64) >= (2.0 / 3.0) * trials as f64;
    let body = serde_json::json!({
        "algorithm": "boost",
        "trials": trials,
        "identical_sequence_rate": seq_match as f64 / trials as f64,
        "ci95": [ci.0, ci.1],
        "holdout_error_within_eps_rate": err_ok as f64 / trials as f64,
        "mean_rounds": outcomes.iter().map(|o| o.rounds.len()).sum::<usize>() as f64 / trials as f64,
        "first_trial_rounds": outcomes.first().map(|o| o.rounds.clone()),
        "failures": failures,
        "seed": a.common.seed,
        "params": { "scheme": format!("{kind:?}"), "dim": a.dim, "margin": a.margin,
                    "rho": a.rho, "eps": a.eps, "ct": a.ct, "m_wkl": a.m_wkl,
                    "check_n": a.check_n },
        "gate_passed": gate,
    });
    emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
    Ok(gate)
}

// ---------------------------------------------------------------- amplify

#[derive(Args, Debug)]
struct AmplifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "coin-bias", default_value_t = 0.9)]
    coin_bias: f64,
    #[arg(long, default_value_t = 5)]
    flips: usize,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    #[arg(long, default_value_t = 0.2)]
    nu: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    #[arg(long = "rho-target", default_value_t = 0.1)]
    rho_target: f64,
    #[arg(long, default_value_t = 40)]
    q1: usize,
    #[arg(long, default_value_t = 2000)]
    q2: usize,
}

fn cmd_amplify(a: AmplifyArgs) -> anyhow::Result<bool> {
    let coin = CoinSource::new(a.coin_bias)?;
    let flips = a.flips;
    let toy = AlgorithmHandle::new("majority", flips, move |data: &mut RandomStream, _algo| {
        let ones: usize = (0..flips).map(|_| coin.draw(data) as usize).sum();
        u8::from(2 * ones > flips)
    });
    let sizes = Some(AmplifySizes { q1: a.q1, q2: a.q2 });
    let root = RandomStream::new(a.common.seed);
    let outcomes = map_trials(a.common.trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let algo = t.derive("algo");
        let r1 = amplify(&toy, a.eta, a.nu, a.beta, a.rho_target, sizes, &t.derive("d1"), &algo);
        let r2 = amplify(&toy, a.eta, a.nu, a.beta, a.rho_target, sizes, &t.derive("d2"), &algo);
        match (r1, r2) {
            (Ok(x), Ok(y)) => (x == y, x.is_none() || y.is_none()),
            _ => (false, true),
        }
    });
    let trials = a.common.trials;
    let agreements = outcomes.iter().filter(|o| o.0).count();
    let bottoms = outcomes.iter().filter(|o| o.1).count();
    let ci = clopper_pearson(agreements, trials);
    let bottom_rate = bottoms as f64 / trials as f64;
    let sigma = (a.beta * (1.0 - a.beta) / trials as f64).sqrt();
    let gate = ci.0 >= 1.0 - 1.2 * a.rho_target && bottom_rate <= a.beta + 3.0 * sigma;
    let body = serde_json::json!({
        "algorithm": "amplify",
        "trials": trials,
        "agreements": agreements,
        "repro_rate": agreements as f64 / trials as f64,
        "ci95": [ci.0, ci.1],
        "bottom_rate": bottom_rate,
        "seed": a.common.seed,
        "params": { "coin_bias": a.coin_bias, "flips": a.flips, "eta": a.eta, "nu": a.nu,
                    "beta": a.beta, "rho_target": a.rho_target, "q1": a.q1, "q2": a.q2 },
        "gate_passed": gate,
    });
    emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
    Ok(gate)
}

// ---------------------------------------------------------------- reuse

#[derive(Args, Debug)]
struct ReuseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 0.02)]
    delta: f64,
    /// Sample size per query; the worst-case size when omitted.
    #[arg(long)]
    n: Option<usize>,
    /// Draws of the shared randomness (transcripts are exact per draw).
    #[arg(long = "r-draws", default_value_t = 200)]
    r_draws: usize,
}

fn cmd_reuse(a: ReuseArgs) -> anyhow::Result<bool> {
    let sq = SqParams::new(a.tau, a.rho, a.delta)?;
    let n = match a.n {
        Some(n) => n,
        None => rstat_sample_size(&sq)?,
    };
    let cfg = DataReuseConfig { sq, n, r_draws: a.r_draws };
    let report = data_reuse_tv(&cfg, &RandomStream::new(a.common.seed))?;
    let bound = (report.queries - 1) as f64 * a.rho;
    let gate = report.mean_tv <= bound;
    let body = serde_json::json!({
        "algorithm": "reuse",
        "mean_tv": report.mean_tv,
        "max_tv": report.max_tv,
        "bound": bound,
        "truncation_error": report.truncation_error,
        "seed": a.common.seed,
        "params": { "rho": a.rho, "tau": a.tau, "delta": a.delta, "n": n, "r_draws": a.r_draws },
        "gate_passed": gate,
    });
    emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
    Ok(gate)
}

// ---------------------------------------------------------------- gen-check

#[derive(Args, Debug)]
struct GenCheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.3)]
    margin: f64,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long = "n-train", default_value_t = 400)]
    n_train: usize,
    #[arg(long = "n-test", default_value_t = 5000)]
    n_test: usize,
}

fn cmd_gen_check(a: GenCheckArgs) -> anyhow::Result<bool> {
    let kind = SchemeKind::Box;
    let params = WklParams::new(a.rho, a.dim, a.margin, kind)?.with_m_override(a.n_train);
    let dim = a.dim;
    let margin = a.margin;
    let root = RandomStream::new(a.common.seed);
    let dist_root = root.derive("dist");
    let src = MarginHalfspaceSource::with_random_direction(dim, margin, &mut dist_root.clone())?;

    // Measured reproducibility of the same learner at the same sizes.
    let src_repro = src.clone();
    let m = a.n_train;
    let spec = PairedRunSpec {
        name: "wkl".into(),
        run: Arc::new(move |data: &mut RandomStream, algo: &RandomStream| {
            let sample = src_repro.sample(m, data);
            r_halfspace_wkl(&sample, &params, kind, &mut algo.clone())
        }),
        accurate: None,
    };
    let repro = estimate_reproducibility(&spec, a.common.trials, &root.derive("repro"));
    let rho_hat = 1.0 - repro.repro_rate;

    let src_gen = src.clone();
    let learner = move |sample: &replearn::dist::LabeledSample, s: &RandomStream| {
        r_halfspace_wkl(sample, &params, kind, &mut s.clone())
    };
    let draw = move |s: &mut RandomStream| src_gen.draw(s);
    let gen = generalization_check(
        &learner,
        &draw,
        a.n_train,
        a.n_test,
        a.delta,
        a.common.trials,
        &root.derive("gen"),
    );
    let sigma = ((rho_hat + a.delta).max(0.01) / a.common.trials as f64).sqrt();
    let gate = gen.violation_rate <= rho_hat + a.delta + 3.0 * sigma;
    let body = serde_json::json!({
        "algorithm": "gen-check",
        "trials": a.common.trials,
        "violation_rate": gen.violation_rate,
        "violations": gen.violations,
        "bound_term": gen.bound,
        "rho_hat": rho_hat,
        "delta": a.delta,
        "seed": a.common.seed,
        "params": { "dim": a.dim, "margin": a.margin, "rho": a.rho,
                    "n_train": a.n_train, "n_test": a.n_test },
        "gate_passed": gate,
    });
    emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
    Ok(gate)
}

// ---------------------------------------------------------------- coin-sweep

#[derive(Args, Debug)]
struct CoinSweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Comma-separated sample sizes; 6 log-spaced points when omitted.
    #[arg(long)]
    grid: Option<String>,
}

fn cmd_coin_sweep(a: CoinSweepArgs) -> anyhow::Result<bool> {
    let params = SqParams::new(a.tau, a.rho, a.delta)?;
    let grid: Vec<usize> = match &a.grid {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<usize>().context("bad grid entry"))
            .collect::<anyhow::Result<_>>()?,
        None => vec![100, 316, 1000, 3162, 10_000, 31_623],
    };
    let root = RandomStream::new(a.common.seed);
    let rows = coin_scaling_sweep(&params, &grid, a.common.trials, &root);
    let fit = coin_scaling_fit(&rows);
    let gate = fit.as_ref().map(|f| f.consistent_with_theory).unwrap_or(false);
    match a.common.format {
        Format::Csv => {
            let mut text = sweep_rows_to_csv(&rows);
            if let Ok(f) = &fit {
                text.push_str(&format!("# slope,{}\n# consistent,{}\n", f.slope, gate));
            }
            emit(&a.common, &text)?;
        }
        Format::Json => {
            let body = serde_json::json!({
                "algorithm": "coin-sweep",
                "rows": rows,
                "fit": fit.ok(),
                "seed": a.common.seed,
                "params": { "tau": a.tau, "rho": a.rho, "delta": a.delta, "trials": a.common.trials },
                "gate_passed": gate,
            });
            emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
        }
    }
    Ok(gate)
}

// ---------------------------------------------------------------- foams-probe

#[derive(Args, Debug)]
struct FoamsProbeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated pair distances.
    #[arg(long, default_value = "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
    eps_grid: String,
    /// Scheme draws per grid point.
    #[arg(long, default_value_t = 1000)]
    schemes: usize,
    /// Displacement checks.
    #[arg(long, default_value_t = 10000)]
    points: usize,
}

#[derive(serde::Serialize)]
struct ProbeRow {
    eps: f64,
    foam_rate: f64,
    box_rate: f64,
    schemes: usize,
}

fn cmd_foams_probe(a: FoamsProbeArgs) -> anyhow::Result<bool> {
    let eps_grid: Vec<f64> = a
        .eps_grid
        .split(',')
        .map(|x| x.trim().parse::<f64>().context("bad eps entry"))
        .collect::<anyhow::Result<_>>()?;
    let dim = a.dim;
    let root = RandomStream::new(a.common.seed);
    let rows: Vec<ProbeRow> = eps_grid
        .iter()
        .map(|&eps| {
            let point_root = root.derive(&format!("eps{eps}"));
            let disagreements = map_trials(a.schemes, |i| {
                let t = point_root.derive(&format!("s{i}"));
                let mut pair = t.derive("pair");
                let x: Vec<f64> =
                    (0..dim).map(|_| pair.draw_uniform(-2.0, 2.0).unwrap()).collect();
                let dir: Vec<f64> = {
                    let raw: Vec<f64> = (0..dim).map(|_| pair.draw_standard_normal()).collect();
                    replearn::vecmath::normalized(&raw).unwrap_or_else(|| {
                        let mut e = vec![0.0; dim];
                        e[0] = 1.0;
                        e
                    })
                };
                let y: Vec<f64> =
                    x.iter().zip(&dir).map(|(xi, ui)| xi + eps * ui).collect();
                let foam =
                    FoamScheme::construct(dim, &mut t.derive("foam"), FOAM_DEFAULT_MAX_STAGES)
                        .unwrap();
                let fx = foam.apply(&x).unwrap();
                let fy = foam.apply(&y).unwrap();
                let boxes = BoxScheme::construct(dim, &mut t.derive("box")).unwrap();
                let bx = boxes.apply(&x).unwrap();
                let by = boxes.apply(&y).unwrap();
                (usize::from(fx != fy), usize::from(bx != by))
            });
            let foam_dis: usize = disagreements.iter().map(|d| d.0).sum();
            let box_dis: usize = disagreements.iter().map(|d| d.1).sum();
            ProbeRow {
                eps,
                foam_rate: foam_dis as f64 / a.schemes as f64,
                box_rate: box_dis as f64 / a.schemes as f64,
                schemes: a.schemes,
            }
        })
        .collect();

    // Max-displacement sweep on one foam scheme.
    let foam = FoamScheme::construct(dim, &mut root.derive("disp"), FOAM_DEFAULT_MAX_STAGES)?;
    let mut disp_stream = root.derive("disp-points");
    let mut max_disp: f64 = 0.0;
    for _ in 0..a.points {
        let x: Vec<f64> =
            (0..dim).map(|_| disp_stream.draw_uniform(-3.0, 3.0).unwrap()).collect();
        let r = foam.apply(&x)?;
        max_disp = max_disp.max(replearn::vecmath::distance(&x, &r));
    }
    let bound_ok = rows.iter().all(|r| {
        let sigma = (r.foam_rate * (1.0 - r.foam_rate) / r.schemes as f64).sqrt();
        r.foam_rate <= 7.0 * r.eps + 3.0 * sigma.max(0.001)
    });
    let gate = bound_ok && max_disp <= (dim as f64).sqrt();
    match a.common.format {
        Format::Csv => {
            let mut text = String::from("eps,foam_rate,box_rate,schemes\n");
            for r in &rows {
                text.push_str(&format!("{},{},{},{}\n", r.eps, r.foam_rate, r.box_rate, r.schemes));
            }
            text.push_str(&format!("# max_displacement,{max_disp}\n# gate,{gate}\n"));
            emit(&a.common, &text)?;
        }
        Format::Json => {
            let body = serde_json::json!({
                "algorithm": "foams-probe",
                "rows": rows,
                "max_displacement": max_disp,
                "displacement_bound": (dim as f64).sqrt(),
                "seed": a.common.seed,
                "params": { "dim": a.dim, "schemes": a.schemes, "points": a.points },
                "gate_passed": gate,
            });
            emit(&a.common, &serde_json::to_string_pretty(&body)?)?;
        }
    }
    if !(0.0..1.0).contains(&rows.first().map(|r| r.foam_rate).unwrap_or(0.0)) {
        bail!("probe produced an out-of-range rate");
    }
    Ok(gate)
}
