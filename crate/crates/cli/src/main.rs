use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use seasonal_vol::config::RunConfig;
use seasonal_vol::correlation::{corr_term_structure, default_grid};
use seasonal_vol::montecarlo::{mc_expectation, McSettings};
use seasonal_vol::spread::{cso_call_detailed, model_implied_correlation, spread_forward_value};
use seasonal_vol::vanilla::{price_vanilla, resolved_implied_vol};
use seasonal_vol::{CfEngine, CsoSpec, Error, ModelConfig, OptionKind, VanillaSpec};

mod csv;

use csv::{num, Table};

#[derive(Parser)]
#[command(
    name = "svol",
    version,
    about = "Seasonal stochastic volatility pricing for commodity futures"
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed, overriding [mc].seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArg {
    /// Use the model of this [cases.NAME] block instead of the base model.
    #[arg(long)]
    case: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Price one European option and report its Black-76 implied vol.
    PriceVanilla {
        #[arg(long)]
        strike: f64,
        #[arg(long)]
        expiry: f64,
        /// Defaults to the option expiry.
        #[arg(long)]
        futures_maturity: Option<f64>,
        #[arg(long)]
        put: bool,
        #[command(flatten)]
        case: CaseArg,
    },
    /// Price one calendar spread option (lower bound).
    PriceCso {
        #[arg(long)]
        expiry: f64,
        /// Defaults to the option expiry.
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: f64,
        #[arg(long, allow_hyphen_values = true)]
        strike: f64,
        #[arg(long)]
        put: bool,
        #[command(flatten)]
        case: CaseArg,
    },
    /// Implied volatility smile at one expiry.
    Smile {
        #[arg(long)]
        expiry: Option<f64>,
        #[arg(long)]
        futures_maturity: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        strikes: Option<Vec<f64>>,
        #[command(flatten)]
        case: CaseArg,
    },
    /// ATM implied volatility term structure with T = T_m.
    TermStructure {
        #[arg(long, value_delimiter = ',')]
        maturities: Option<Vec<f64>>,
        #[command(flatten)]
        case: CaseArg,
    },
    /// Calendar spread price table over the configured cases.
    CsoTable,
    /// Instantaneous correlation with deterministic variances.
    InstCorr {
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        case: CaseArg,
    },
    /// Gaussian-copula implied correlation of model spread prices.
    ImpliedCorr {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        strike: f64,
    },
    /// Compare Fourier prices with Monte Carlo estimates.
    McValidate {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps_per_year: Option<usize>,
        #[command(flatten)]
        case: CaseArg,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .is_some_and(Error::is_numerical);
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
    let mut cfg = RunConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    let output = match &cli.command {
        Command::PriceVanilla {
            strike,
            expiry,
            futures_maturity,
            put,
            case,
        } => {
            let model = select(&cfg, case)?;
            let kind = if *put { OptionKind::Put } else { OptionKind::Call };
            let spec = VanillaSpec::new(*strike, *expiry, futures_maturity.unwrap_or(*expiry), kind)?;
            let engine = CfEngine::new(model.clone());
            let p = price_vanilla(&engine, &spec)?;
            let fwd = model.initial_price(spec.futures_maturity)?;
            let iv = match resolved_implied_vol(&p, fwd, &spec, model.rate()) {
                Ok(v) => format!("{v:.6}"),
                Err(e) if e.is_numerical() => "NA".into(),
                Err(e) => return Err(e.into()),
            };
            format!("price {:.6}\nimplied_vol {iv}\n", p.price)
        }
        Command::PriceCso {
            expiry,
            t1,
            t2,
            strike,
            put,
            case,
        } => {
            let model = select(&cfg, case)?;
            let spec = CsoSpec::new(*expiry, t1.unwrap_or(*expiry), *t2, *strike)?;
            let engine = CfEngine::new(model.clone());
            let r = cso_call_detailed(&engine, &spec, &cfg.spread)?;
            let price = if *put {
                r.price.price - spread_forward_value(&engine, &spec)?
            } else {
                r.price.price
            };
            format!("price {price:.6}\n")
        }
        Command::Smile {
            expiry,
            futures_maturity,
            strikes,
            case,
        } => {
            let model = select(&cfg, case)?;
            let expiry = expiry.unwrap_or(cfg.smile.expiry);
            let maturity = futures_maturity.unwrap_or(if expiry == cfg.smile.expiry {
                cfg.smile.futures_maturity
            } else {
                expiry
            });
            let strikes = strikes.clone().unwrap_or_else(|| cfg.smile.strikes.clone());
            let engine = CfEngine::new(model.clone());
            let fwd = model.initial_price(maturity)?;
            let rows = strikes
                .par_iter()
                .map(|&k| -> Result<Vec<String>> {
                    let spec = VanillaSpec::new(k, expiry, maturity, OptionKind::Call)?;
                    let p = price_vanilla(&engine, &spec)?;
                    let iv = resolved_implied_vol(&p, fwd, &spec, model.rate()).unwrap_or(f64::NAN);
                    Ok(vec![num(k), num(p.price), num(iv)])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(["strike", "price", "implied_vol"]);
            rows.into_iter().for_each(|r| t.push(r));
            t.render()
        }
        Command::TermStructure { maturities, case } => {
            let model = select(&cfg, case)?;
            let grid = maturities.clone().unwrap_or_else(|| cfg.term_structure.clone());
            let engine = CfEngine::new(model.clone());
            let rows = grid
                .par_iter()
                .map(|&m| -> Result<Vec<String>> {
                    let fwd = model.initial_price(m)?;
                    let spec = VanillaSpec::call(fwd, m)?;
                    let p = price_vanilla(&engine, &spec)?;
                    let iv = resolved_implied_vol(&p, fwd, &spec, model.rate()).unwrap_or(f64::NAN);
                    Ok(vec![num(m), num(p.price), num(iv)])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(["maturity", "atm_price", "implied_vol"]);
            rows.into_iter().for_each(|r| t.push(r));
            t.render()
        }
        Command::CsoTable => cso_table(&cfg)?,
        Command::InstCorr { t1, t2, points, case } => {
            let model = select(&cfg, case)?;
            let grid = cfg.corr.unwrap_or(seasonal_vol::config::CorrGrid {
                t1: 1.0,
                t2: 1.5,
                points: 601,
            });
            let (t1, t2) = (t1.unwrap_or(grid.t1), t2.unwrap_or(grid.t2));
            let ts = corr_term_structure(model, t1, t2, &default_grid(t1, points.unwrap_or(grid.points)))?;
            let mut t = Table::new(["t", "correlation", "benchmark", "difference", "v1", "v2"]);
            for i in 0..ts.seasonal.grid.len() {
                t.push(vec![
                    num(ts.seasonal.grid[i]),
                    num(ts.seasonal.values[i]),
                    num(ts.benchmark.values[i]),
                    num(ts.difference[i]),
                    num(ts.variances[i].0),
                    num(ts.variances[i].1),
                ]);
            }
            t.render()
        }
        Command::ImpliedCorr { strike } => implied_corr_table(&cfg, *strike)?,
        Command::McValidate {
            paths,
            steps_per_year,
            case,
        } => {
            let model = select(&cfg, case)?;
            let mut settings = cfg.mc;
            if let Some(p) = paths {
                settings.paths = *p;
            }
            if let Some(s) = steps_per_year {
                settings.steps_per_year = *s;
            }
            settings.validate()?;
            mc_validate(&cfg, model, &settings)?
        }
    };
    match &cli.out {
        Some(p) => std::fs::write(p, output).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{output}"),
    }
    Ok(())
}

fn select<'a>(cfg: &'a RunConfig, case: &CaseArg) -> Result<&'a ModelConfig> {
    match &case.case {
        None => Ok(&cfg.model),
        Some(name) => cfg
            .cases
            .iter()
            .find(|c| &c.name == name)
            .map(|c| &c.model)
            .ok_or_else(|| anyhow!("cases.{name}: no such case in the config")),
    }
}

/// (name, model) pairs: the configured cases, or the base model alone.
fn case_models(cfg: &RunConfig) -> Vec<(String, &ModelConfig)> {
    if cfg.cases.is_empty() {
        vec![("model".to_string(), &cfg.model)]
    } else {
        cfg.cases.iter().map(|c| (c.name.clone(), &c.model)).collect()
    }
}

fn strike_label(k: f64) -> String {
    format!("K{}", num(k))
}

fn cso_table(cfg: &RunConfig) -> Result<String> {
    let cases = case_models(cfg);
    let grid = &cfg.cso;
    let mut header = vec!["T".to_string(), "T1".into(), "T2".into()];
    for (name, _) in &cases {
        for &k in &grid.strikes {
            header.push(format!("{name}_{}", strike_label(k)));
        }
    }
    let engines: Vec<CfEngine> = cases.iter().map(|(_, m)| CfEngine::new((*m).clone())).collect();
    let cells: Vec<(usize, usize, usize)> = (0..grid.expiries.len())
        .flat_map(|r| (0..engines.len()).flat_map(move |c| (0..grid.strikes.len()).map(move |k| (r, c, k))))
        .collect();
    let prices = cells
        .par_iter()
        .map(|&(r, c, k)| -> Result<f64> {
            let t = grid.expiries[r];
            let spec = CsoSpec::new(t, t, t + grid.gap, grid.strikes[k])?;
            Ok(cso_call_detailed(&engines[c], &spec, &cfg.spread)?.price.price)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(header);
    let per_row = engines.len() * grid.strikes.len();
    for (r, &t) in grid.expiries.iter().enumerate() {
        let mut row = vec![num(t), num(t), num(t + grid.gap)];
        row.extend(prices[r * per_row..(r + 1) * per_row].iter().map(|&p| num(p)));
        table.push(row);
    }
    Ok(table.render())
}

fn implied_corr_table(cfg: &RunConfig, strike: f64) -> Result<String> {
    let cases = case_models(cfg);
    let grid = &cfg.cso;
    let mut header = vec!["T".to_string(), "T1".into(), "T2".into()];
    for (name, _) in &cases {
        for col in ["cso", "vol1", "vol2", "corr"] {
            header.push(format!("{name}_{col}"));
        }
    }
    let engines: Vec<CfEngine> = cases.iter().map(|(_, m)| CfEngine::new((*m).clone())).collect();
    let cells: Vec<(usize, usize)> = (0..grid.expiries.len())
        .flat_map(|r| (0..engines.len()).map(move |c| (r, c)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(r, c)| -> Result<[f64; 4]> {
            let t = grid.expiries[r];
            let spec = CsoSpec::new(t, t, t + grid.gap, strike)?;
            match model_implied_correlation(&engines[c], &spec, None) {
                Ok(ic) => Ok([ic.cso_price, ic.leg_vols.0, ic.leg_vols.1, ic.correlation]),
                Err(Error::NoSolution { .. }) => {
                    let p = cso_call_detailed(&engines[c], &spec, &cfg.spread)?.price.price;
                    Ok([p, f64::NAN, f64::NAN, f64::NAN])
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(header);
    for (r, &t) in grid.expiries.iter().enumerate() {
        let mut row = vec![num(t), num(t), num(t + grid.gap)];
        for c in 0..engines.len() {
            row.extend(values[r * engines.len() + c].iter().map(|&x| num(x)));
        }
        table.push(row);
    }
    Ok(table.render())
}

fn mc_validate(cfg: &RunConfig, model: &ModelConfig, settings: &McSettings) -> Result<String> {
    let engine = CfEngine::new(model.clone());
    let mut t = Table::new([
        "instrument",
        "expiry",
        "maturity1",
        "maturity2",
        "strike",
        "cf_price",
        "mc_price",
        "mc_stderr",
        "z_score",
    ]);
    let smile = &cfg.smile;
    let df = model.discount(smile.expiry);
    let strikes = smile.strikes.clone();
    let mc = mc_expectation(
        model,
        smile.expiry,
        &[smile.futures_maturity],
        settings,
        strikes.len(),
        |f, out| {
            for (o, k) in out.iter_mut().zip(&strikes) {
                *o = df * (f[0] - k).max(0.0);
            }
        },
    )?;
    for (k, est) in strikes.iter().zip(&mc) {
        let spec = VanillaSpec::new(*k, smile.expiry, smile.futures_maturity, OptionKind::Call)?;
        let cf = price_vanilla(&engine, &spec)?.price;
        t.push(vec![
            "call".into(),
            num(smile.expiry),
            num(smile.futures_maturity),
            String::new(),
            num(*k),
            num(cf),
            num(est.value),
            num(est.stderr),
            num(est.z_score(cf)),
        ]);
    }

    let Some(&expiry) = cfg.cso.expiries.first() else {
        bail!("cso.expiries: grid is empty")
    };
    let (t1, t2) = (expiry, expiry + cfg.cso.gap);
    let df = model.discount(expiry);
    let strikes = cfg.cso.strikes.clone();
    let mc = mc_expectation(model, expiry, &[t1, t2], settings, strikes.len(), |f, out| {
        for (o, k) in out.iter_mut().zip(&strikes) {
            *o = df * (f[0] - f[1] - k).max(0.0);
        }
    })?;
    for (k, est) in strikes.iter().zip(&mc) {
        let spec = CsoSpec::new(expiry, t1, t2, *k)?;
        let cf = cso_call_detailed(&engine, &spec, &cfg.spread)?.price.price;
        t.push(vec![
            "spread_call".into(),
            num(expiry),
            num(t1),
            num(t2),
            num(*k),
            num(cf),
            num(est.value),
            num(est.stderr),
            num(est.z_score(cf)),
        ]);
    }
    Ok(t.render())
}
