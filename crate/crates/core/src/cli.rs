//! Command-line front end.

use std::ffi::OsString;
use std::io::{Read, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::counting::{self, BoxKind, Weight};
use crate::error::{Error, Result};
use crate::harness::{self, MuMode, PredictOptions};
use crate::integral::{self, RealSystem};
use crate::invariants;
use crate::local::{self, LocalOptions};
use crate::normalize;
use crate::polysys::{parse_system, MonomialOrder, PolySystem};
use crate::weyl;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "primesys", version, about = "Prime solutions of polynomial systems: counts versus the circle-method main term")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Work cap (point evaluations) applied to enumerations.
    #[arg(long, global = true, value_parser = parse_f64)]
    budget: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// System JSON file; `-` or absent reads standard input.
    file: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce a system to graded-lex normal form.
    Normalize {
        #[command(flatten)]
        input: Input,
        /// Variable priority as a permutation of 1..n, highest first.
        #[arg(long, value_delimiter = ',')]
        priority: Option<Vec<usize>>,
    },
    /// Birch rank estimates and the regularity threshold verdict.
    Rank {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', default_values_t = invariants::DEFAULT_PRIMES.to_vec())]
        primes: Vec<u64>,
    },
    /// Lattice points on the rank-deficiency variety and the fitted g.
    Weyl {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u64, 4, 8])]
        radii: Vec<u64>,
        /// Use only the leading form of this polynomial (0-based, ascending degree).
        #[arg(long)]
        form_index: Option<usize>,
    },
    /// Weighted solution counts in a box.
    Count {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_count)]
        x_max: u64,
        /// Extra box sizes to count at (the largest row is always `--x-max`).
        #[arg(long, value_delimiter = ',', value_parser = parse_count)]
        x_grid: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value = "mangoldt")]
        weight: WeightArg,
        #[arg(long = "box", value_enum, default_value = "positive")]
        box_kind: BoxArg,
    },
    /// Per-prime local density profiles.
    Local {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u64, 3, 5, 7])]
        primes: Vec<u64>,
        #[arg(long, default_value_t = local::DEFAULT_T_MAX)]
        t_max: u32,
    },
    /// Truncated singular series.
    Sigma {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_count, default_value = "1000")]
        p_max: u64,
        #[arg(long, default_value_t = local::DEFAULT_T_MAX)]
        t_max: u32,
        /// Also sum `B(q)` over all `q ≤ Q` as a cross-check.
        #[arg(long, value_parser = parse_count)]
        q_max: Option<u64>,
    },
    /// The singular integral.
    Integral {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "shell")]
        method: MethodArg,
        #[arg(long, value_parser = parse_count, default_value = "1048576")]
        samples: u64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.02, 0.01, 0.005])]
        eps: Vec<f64>,
        /// Truncation `L` of the oscillatory integral.
        #[arg(long, default_value_t = 8.0)]
        l: f64,
        /// Scale `X` for `f(Xv)/X^ℓ`; without it the leading forms are used.
        #[arg(long, value_parser = parse_count)]
        x: Option<u64>,
    },
    /// Predicted main term at one `X`.
    Predict {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_count)]
        x: u64,
        #[command(flatten)]
        main: MainTermArgs,
    },
    /// Empirical counts against the prediction on a grid of `X`.
    Compare {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_count)]
        x_max: u64,
        #[arg(long, value_delimiter = ',', value_parser = parse_count)]
        x_grid: Option<Vec<u64>>,
        #[command(flatten)]
        main: MainTermArgs,
    },
}

#[derive(Debug, Args)]
struct MainTermArgs {
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    p_max: u64,
    #[arg(long, value_parser = parse_count, default_value = "4194304")]
    samples: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.02, 0.01, 0.005])]
    eps: Vec<f64>,
    /// Use the leading forms instead of the scaled system for μ(∞).
    #[arg(long)]
    leading: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WeightArg {
    Mangoldt,
    PrimeLog,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoxArg {
    Positive,
    Symmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Shell,
    Oscillatory,
}

/// Non-negative integer, also written as `1e6` or `2.5e3`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !f.is_finite() || f < 0.0 || f.fract() != 0.0 || f >= 9.2e18 {
        return Err(format!("`{s}` is not a non-negative integer"));
    }
    Ok(f as u64)
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f.is_finite() && f > 0.0 {
        Ok(f)
    } else {
        Err(format!("`{s}` must be positive"))
    }
}

/// 17 significant digits, enough to round-trip any double.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl Command {
    fn input(&self) -> &Input {
        match self {
            Command::Normalize { input, .. }
            | Command::Rank { input, .. }
            | Command::Weyl { input, .. }
            | Command::Count { input, .. }
            | Command::Local { input, .. }
            | Command::Sigma { input, .. }
            | Command::Integral { input, .. }
            | Command::Predict { input, .. }
            | Command::Compare { input, .. } => input,
        }
    }
}

fn reads_stdin(input: &Input) -> bool {
    matches!(input.file.as_deref(), None | Some("-"))
}

fn read_input(input: &Input, stdin: &str) -> Result<PolySystem> {
    if reads_stdin(input) {
        parse_system(stdin)
    } else {
        let path = input.file.as_deref().unwrap_or_default();
        parse_system(&std::fs::read_to_string(path)?)
    }
}

struct Output {
    format: Format,
    out: Vec<u8>,
}

impl Output {
    fn json<T: Serialize>(&mut self, v: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(v).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(self.out, "{text}")?;
        Ok(())
    }

    fn csv(&mut self, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(&mut self.out);
        let io = |e: csv::Error| Error::Internal(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    fn emit<T: Serialize>(&mut self, v: &T, header: &[&str], rows: impl FnOnce() -> Vec<Vec<String>>) -> Result<()> {
        match self.format {
            Format::Json => self.json(v),
            Format::Csv => self.csv(header, rows()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 2 invalid input, 3 budget refusal,
/// 4 internal failure.
pub fn run_cli<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return 4;
        }
    };
    let mut text = String::new();
    if reads_stdin(cli.command.input()) {
        if let Err(e) = stdin.read_to_string(&mut text) {
            let _ = writeln!(err, "error: {e}");
            return Error::from(e).exit_code();
        }
    }
    let mut buf = Output { format: cli.format, out: Vec::new() };
    let result = pool.install(|| dispatch(&cli, &text, &mut buf));
    if out.write_all(&buf.out).and_then(|_| out.flush()).is_err() {
        return 4;
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, stdin: &str, out: &mut Output) -> Result<()> {
    let budget = cli.budget;
    let local_opts = |t_max: u32| LocalOptions {
        t_max,
        budget: budget.unwrap_or(LocalOptions::default().budget),
        ..LocalOptions::default()
    };
    match &cli.command {
        Command::Normalize { input, priority } => {
            let s = read_input(input, stdin)?;
            let ord = match priority {
                Some(p) => {
                    if p.iter().any(|&v| v == 0) {
                        return Err(Error::Validation("variable priority is 1-based".into()));
                    }
                    MonomialOrder::with_priority(p.iter().map(|v| v - 1).collect())?
                }
                None => MonomialOrder::grlex(s.n()),
            };
            let nf = normalize::reduce_to_normal_form(&s, &ord)?;
            let report = normalize::verify_normal_form(&nf);
            if !report.all_hold() {
                return Err(Error::Internal(format!("normal form failed verification: {report:?}")));
            }
            let doc = nf.to_doc();
            let mut v = serde_json::to_value(&doc).map_err(|e| Error::Internal(e.to_string()))?;
            if let Some(pr) = v.get_mut("variable_priority").and_then(Value::as_array_mut) {
                for x in pr.iter_mut() {
                    *x = json!(x.as_u64().unwrap_or_default() + 1);
                }
            }
            v["report"] = serde_json::to_value(&report).map_err(|e| Error::Internal(e.to_string()))?;
            out.emit(&v, &["degree", "leading", "c", "chi", "tail"], || {
                nf.entries
                    .iter()
                    .map(|e| vec![e.degree.to_string(), e.leading.to_string(), e.c.to_string(), e.chi.to_string(), e.tail.to_string()])
                    .collect()
            })
        }
        Command::Rank { input, primes } => {
            let s = read_input(input, stdin)?;
            let est = invariants::estimate_all(&s, primes, budget.unwrap_or(invariants::DEFAULT_RANK_BUDGET))?;
            let verdict = invariants::regularity_verdict(&s, &est)?;
            let mut per = serde_json::Map::new();
            for (l, e) in &est {
                per.insert(
                    l.to_string(),
                    json!({"B_hat": e.value, "method": e.method, "confidence": e.confidence, "primes": e.primes_used, "point_counts": e.point_counts}),
                );
            }
            let v = json!({"per_degree": Value::Object(per), "verdict": verdict});
            out.emit(&v, &["degree", "b_hat", "method", "confidence", "required", "achieved_lower_bound"], || {
                est.iter()
                    .map(|(l, e)| {
                        let th = verdict.thresholds.iter().find(|t| t.degree == *l);
                        vec![
                            l.to_string(),
                            e.value.map(|v| v.to_string()).unwrap_or_else(|| "inf".into()),
                            format!("{:?}", e.method),
                            format!("{:?}", e.confidence),
                            th.map(|t| t.required.to_string()).unwrap_or_default(),
                            th.map(|t| t.achieved_lower_bound.map(num).unwrap_or_else(|| "inf".into())).unwrap_or_default(),
                        ]
                    })
                    .collect()
            })
        }
        Command::Weyl { input, radii, form_index } => {
            let s = read_input(input, stdin)?;
            let forms = match form_index {
                Some(k) => {
                    let p = s
                        .polys()
                        .nth(*k)
                        .ok_or_else(|| Error::Validation(format!("form index {k} out of range")))?;
                    vec![p.leading_form()]
                }
                None => s.group(s.d()).iter().map(|p| p.leading_form()).collect(),
            };
            let fit = weyl::g_estimate(&forms, radii)?;
            out.emit(&fit, &["r0", "z", "slope"], || {
                fit.radii
                    .iter()
                    .zip(&fit.counts)
                    .map(|(r, z)| vec![r.to_string(), z.to_string(), opt_num(fit.slope)])
                    .collect()
            })
        }
        Command::Count { input, x_max, x_grid, weight, box_kind } => {
            let mut xs = x_grid.clone().unwrap_or_default();
            xs.retain(|&x| x < *x_max);
            xs.push(*x_max);
            xs.sort_unstable();
            xs.dedup();
            if *x_max > crate::arith::MAX_TABLE {
                return Err(Error::budget("counting box side", *x_max as f64, crate::arith::MAX_TABLE as f64));
            }
            let s = read_input(input, stdin)?;
            let w = match weight {
                WeightArg::Mangoldt => Weight::Mangoldt,
                WeightArg::PrimeLog => Weight::PrimeLog,
                WeightArg::None => Weight::None,
            };
            let b = match box_kind {
                BoxArg::Positive => BoxKind::Positive,
                BoxArg::Symmetric => BoxKind::Symmetric,
            };
            let table = match w {
                Weight::None => None,
                _ => Some(crate::arith::PrimeTable::new(*x_max)?),
            };
            let results: Vec<counting::CountResult> = xs
                .iter()
                .map(|&x| counting::weighted_count_with(&s, x, w, b, table.as_ref(), budget.unwrap_or(counting::DEFAULT_COUNT_BUDGET)))
                .collect::<Result<_>>()?;
            out.emit(&results, &["x", "value", "strategy", "seconds"], || {
                results
                    .iter()
                    .map(|r| vec![r.x.to_string(), num(r.weighted_sum), r.enumeration_strategy.clone(), num(r.wall_time)])
                    .collect()
            })
        }
        Command::Local { input, primes, t_max } => {
            let s = read_input(input, stdin)?;
            let opts = LocalOptions {
                verify_p_max: primes.iter().copied().max().unwrap_or(0),
                ..local_opts(*t_max)
            };
            let profiles: Vec<local::LocalProfile> = primes.iter().map(|&p| local::mu_p(&s, p, &opts)).collect::<Result<_>>()?;
            out.emit(&profiles, &["p", "t", "nu_t", "b_route", "nu_route", "mu_p", "stabilized_at", "obstruction"], || {
                profiles
                    .iter()
                    .flat_map(|pr| {
                        pr.partials.iter().map(move |pt| {
                            vec![
                                pr.p.to_string(),
                                pt.t.to_string(),
                                pt.nu_t.to_string(),
                                opt_num(pt.b_route),
                                num(pt.nu_route),
                                num(pr.mu_p),
                                pr.stabilized_at.map(|t| t.to_string()).unwrap_or_default(),
                                pr.obstruction.to_string(),
                            ]
                        })
                    })
                    .collect()
            })
        }
        Command::Sigma { input, p_max, t_max, q_max } => {
            let s = read_input(input, stdin)?;
            let sd = local::sigma_truncated(&s, *p_max, &local_opts(*t_max))?;
            let by_q = match q_max {
                Some(q) => Some(local::sigma_by_q(&s, *q, budget.unwrap_or(1e9))?),
                None => None,
            };
            let mut v = serde_json::to_value(&sd).map_err(|e| Error::Internal(e.to_string()))?;
            if let Some(b) = by_q {
                v["sigma_by_q"] = json!(b);
                v["q_max"] = json!(q_max);
                v["product_minus_sum"] = json!(sd.sigma_truncated - b);
            }
            out.emit(&v, &["key", "value"], || {
                let mut rows = vec![
                    vec!["sigma_truncated".into(), num(sd.sigma_truncated)],
                    vec!["tail_bound".into(), num(sd.tail_bound)],
                    vec!["p_max".into(), sd.p_max.to_string()],
                ];
                if let Some(b) = by_q {
                    rows.push(vec!["sigma_by_q".into(), num(b)]);
                }
                rows.extend(sd.factors.iter().map(|(p, m)| vec![format!("mu_{p}"), num(*m)]));
                rows
            })
        }
        Command::Integral { input, method, samples, eps, l, x } => {
            let s = read_input(input, stdin)?;
            let f = match x {
                Some(x) => RealSystem::scaled(&s, *x as f64),
                None => RealSystem::leading(&s),
            };
            let est = match method {
                MethodArg::Shell => integral::shell_mu_infty(&f, eps, *samples, cli.seed)?,
                MethodArg::Oscillatory => integral::j_of_l(&f, *l, *samples, cli.seed, budget.unwrap_or(integral::DEFAULT_J_BUDGET))?,
            };
            out.emit(&est, &["method", "value", "stderr", "ci_low", "ci_high", "samples"], || {
                vec![vec![
                    format!("{:?}", est.method).to_lowercase(),
                    num(est.value),
                    num(est.stderr),
                    num(est.confidence_interval.0),
                    num(est.confidence_interval.1),
                    est.samples.to_string(),
                ]]
            })
        }
        Command::Predict { input, x, main } => {
            let s = read_input(input, stdin)?;
            let opts = predict_options(cli, main);
            let pr = harness::predict(&s, *x, &opts)?;
            out.emit(&pr, &["x", "sigma_truncated", "mu_infty", "c_f", "predicted", "predicted_low", "predicted_high"], || {
                vec![vec![
                    pr.x.to_string(),
                    num(pr.sigma.sigma_truncated),
                    num(pr.mu_infty.value),
                    num(pr.c_f),
                    num(pr.predicted),
                    num(pr.predicted_interval.0),
                    num(pr.predicted_interval.1),
                ]]
            })
        }
        Command::Compare { input, x_max, x_grid, main } => {
            if *x_max > crate::arith::MAX_TABLE {
                return Err(Error::budget("counting box side", *x_max as f64, crate::arith::MAX_TABLE as f64));
            }
            let mut xs = x_grid.clone().unwrap_or_else(|| vec![(x_max / 4).max(1), (x_max / 2).max(1)]);
            xs.retain(|&x| x < *x_max);
            xs.push(*x_max);
            xs.sort_unstable();
            xs.dedup();
            let s = read_input(input, stdin)?;
            let opts = predict_options(cli, main);
            let rep = harness::compare(&s, &xs, &opts)?;
            out.emit(&rep, &["x", "m_f", "m_prime_f", "mu_infty", "predicted", "ratio_m", "ratio_m_prime"], || {
                rep.rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.x.to_string(),
                            num(r.m_f),
                            num(r.m_prime_f),
                            num(r.mu_infty),
                            num(r.predicted),
                            opt_num(r.ratio_m),
                            opt_num(r.ratio_m_prime),
                        ]
                    })
                    .collect()
            })
        }
    }
}

fn predict_options(cli: &Cli, main: &MainTermArgs) -> PredictOptions {
    let mut opts = PredictOptions {
        p_max: main.p_max,
        samples: main.samples,
        eps: main.eps.clone(),
        seed: cli.seed,
        mu_mode: if main.leading { MuMode::Leading } else { MuMode::Scaled },
        ..PredictOptions::default()
    };
    if let Some(b) = cli.budget {
        opts.count_budget = b;
        opts.local.budget = b;
    }
    opts
}
