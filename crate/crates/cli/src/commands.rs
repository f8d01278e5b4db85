//! One function per subcommand: resolve typed parameters, run, write artifacts.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use fraclab::formulas::{
    brownian_sup_smallball_exact, spec_from_parts, ConstantRequest, ConstantValue, LqMode, Weight,
};
use fraclab::lil_lab::{self, KappaSource, LilExperiment, Theorem};
use fraclab::smallball::{
    estimate_kappa, estimate_probs, Estimator, FitModel, GridRule, McOptions, NormSpec,
    ProbEstimate,
};
use fraclab::urn::{default_checkpoints, lil_diagnostics, UrnParams};
use fraclab::verify::{self, budget_seconds, Profile, ALL_CRITERIA};
use fraclab::{ProcessSampler, ProcessSpec, SeedSpec, TimeGrid};

use crate::config::{ConfigError, Params};
use crate::output::{output_dir, Artifacts};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// A module rejected the parameters.
    Invalid(fraclab::Error),
    /// A module failed while computing.
    Numeric(fraclab::Error),
    Io(std::io::Error),
    /// `verify-all` ran but some criterion failed.
    Failed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed => 1,
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid configuration: {e}"),
            CliError::Invalid(e) => write!(f, "invalid configuration: {e}"),
            CliError::Numeric(e) => write!(f, "numeric failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Failed => write!(f, "one or more criteria failed"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<fraclab::Error> for CliError {
    fn from(e: fraclab::Error) -> Self {
        use fraclab::Error as E;
        match e {
            E::Parameter(_) | E::Admissibility { .. } | E::Precondition(_) | E::Grid(_) => {
                CliError::Invalid(e)
            }
            _ => CliError::Numeric(e),
        }
    }
}

type Res<T> = Result<T, CliError>;

pub fn run(params: &Params) -> Res<()> {
    let workers = params.count("workers")? as usize;
    fraclab::mc::with_workers(workers, || match params.subcommand.as_str() {
        "sample" => sample(params),
        "formulas" => formulas(params),
        "smallball" => smallball(params),
        "lil" => lil(params),
        "urn" => urn(params),
        "verify-all" => verify_all(params),
        other => unreachable!("unregistered subcommand {other}"),
    })
}

fn seed(params: &Params) -> Res<SeedSpec> {
    Ok(SeedSpec::new(params.get("seed")?, params.get("stream")?))
}

fn report(art: &Artifacts) {
    for p in &art.written {
        eprintln!("wrote {}", p.display());
    }
}

fn process_spec(params: &Params) -> Res<ProcessSpec> {
    let gamma: f64 = params.get("gamma")?;
    let alpha: Option<Vec<f64>> = params.list("alpha")?;
    let process: String = params.get("process")?;
    let spec = match process.as_str() {
        "brownian" => spec_from_parts(Some(0.5), None, gamma, alpha.unwrap_or_default()),
        "integrated-brownian" => {
            spec_from_parts(Some(0.5), None, gamma, alpha.unwrap_or_else(|| vec![0.0]))
        }
        "fbm" => spec_from_parts(
            Some(params.get("H")?),
            None,
            gamma,
            alpha.unwrap_or_default(),
        ),
        "rl" => {
            if gamma != 0.0 {
                return Err(params
                    .error("gamma", "smoothing applies to fbm only")
                    .into());
            }
            spec_from_parts(
                None,
                Some(params.get("lambda")?),
                0.0,
                alpha.unwrap_or_default(),
            )
        }
        other => {
            return Err(params
                .error(
                    "process",
                    format!("unknown process `{other}` (brownian, fbm, rl, integrated-brownian)"),
                )
                .into())
        }
    };
    spec.map_err(|e| params.error("process", e.to_string()).into())
}

#[derive(Serialize)]
struct SampleRecord {
    schema_version: u32,
    spec: ProcessSpec,
    seed: SeedSpec,
    grid_intervals: usize,
    t1: f64,
    n_paths: u64,
    self_similarity_index: f64,
}

fn sample(params: &Params) -> Res<()> {
    let spec = process_spec(params)?;
    let n_paths = params.count("paths")?;
    let grid_n = params.count("grid")? as usize;
    let t1: f64 = params.get("t1")?;
    let seed = seed(params)?;
    let grid = Arc::new(TimeGrid::uniform(0.0, t1, grid_n)?);
    let sampler = ProcessSampler::new(&spec, Arc::clone(&grid))?;
    let paths: Vec<Vec<f64>> =
        fraclab::mc::map_paths(&sampler, &seed, 0..n_paths, |_, v| v.to_vec());

    let mut csv = String::from("t");
    for k in 0..n_paths {
        let _ = write!(csv, ",path_{k}");
    }
    csv.push('\n');
    for (i, t) in grid.points().iter().enumerate() {
        let _ = write!(csv, "{t}");
        for p in &paths {
            let _ = write!(csv, ",{}", p[i]);
        }
        csv.push('\n');
    }
    let mut art = Artifacts::new(output_dir(params), params);
    art.csv(&csv)?;
    art.json(&SampleRecord {
        schema_version: 1,
        spec: spec.clone(),
        seed,
        grid_intervals: grid_n,
        t1,
        n_paths,
        self_similarity_index: spec.self_similarity_index(),
    })?;
    let script = format!(
        "set xlabel 't'\nset ylabel 'X(t)'\nplot for [i=2:{}] '{}' using 1:i with lines title columnhead(i)\n",
        n_paths + 1,
        art.csv_name()
    );
    art.plot(&script)?;
    println!("{n_paths} paths of {spec:?} on {grid_n} intervals of [0, {t1}]");
    report(&art);
    Ok(())
}

fn weight(params: &Params) -> Res<Weight> {
    let ab: Vec<f64> = params.list("weight")?.unwrap_or_default();
    if ab.len() != 2 {
        return Err(params.error("weight", "expected two numbers a,b").into());
    }
    Weight::indicator(ab[0], ab[1]).map_err(|e| params.error("weight", e.to_string()).into())
}

fn formulas(params: &Params) -> Res<()> {
    let which: String = params.get("which")?;
    let f = |k: &str| params.get::<f64>(k);
    let weights = || params.list::<f64>("alpha").map(Option::unwrap_or_default);
    let spec = || -> Res<ProcessSpec> {
        spec_from_parts(
            params.opt("H")?,
            params.opt("lambda")?,
            f("gamma")?,
            weights()?,
        )
        .map_err(|e| params.error("alpha", e.to_string()).into())
    };
    let req = match which.as_str() {
        "a_H" => ConstantRequest::AH { hurst: f("H")? },
        "sigma2_W" => ConstantRequest::Sigma2W {
            lambda: f("lambda")?,
        },
        "sigma2_B0" => ConstantRequest::Sigma2B0 {
            hurst: f("H")?,
            gamma: f("gamma")?,
        },
        "sigma2_general" => ConstantRequest::Sigma2General { spec: spec()? },
        "r_lambda" => ConstantRequest::RLambda {
            lambda: f("lambda")?,
            h: f("h")?,
        },
        "r_rec" => ConstantRequest::RRec {
            spec: spec()?,
            h: f("h")?,
        },
        "sigma_tilde2_B" => ConstantRequest::SigmaTilde2B {
            hurst: f("H")?,
            gamma: f("gamma")?,
            weights: weights()?,
        },
        "sigma_tilde2_W" => ConstantRequest::SigmaTilde2W {
            lambda: f("lambda")?,
            weights: weights()?,
        },
        "chung_constant" => ConstantRequest::ChungConstant {
            tau: f("tau")?,
            alpha: first_alpha(params)?,
            kappa: f("kappa")?,
        },
        "lil_constant" => ConstantRequest::LilConstant {
            tau: f("tau")?,
            alpha: first_alpha(params)?,
            kappa: f("kappa")?,
            factor: f("factor")?,
        },
        "kappa_known" => ConstantRequest::KappaKnown {
            lambda: f("lambda")?,
            q: f("q")?,
        },
        "lq_constant" => ConstantRequest::LqConstant {
            mode: match params.get::<String>("mode")?.as_str() {
                "process" => LqMode::Process,
                "integrated" => LqMode::Integrated,
                m => {
                    return Err(params
                        .error("mode", format!("unknown mode `{m}` (process, integrated)"))
                        .into())
                }
            },
            tau: f("tau")?,
            q: f("q")?,
            kappa: f("kappa")?,
            weight: weight(params)?,
        },
        "w_norm" => ConstantRequest::WNorm {
            weight: weight(params)?,
            r: f("r")?,
            tau: f("tau")?,
            q: f("q")?,
        },
        other => {
            return Err(params
                .error("which", format!("unknown constant `{other}`"))
                .into())
        }
    };
    let rec = req.evaluate()?;
    let mut art = Artifacts::new(output_dir(params), params);
    let (value, lo, hi) = match rec.value {
        ConstantValue::Point(v) => (format!("{v:?}"), String::new(), String::new()),
        ConstantValue::Interval([a, b]) => (String::new(), format!("{a:?}"), format!("{b:?}")),
        ConstantValue::Unknown(_) => ("unknown".into(), String::new(), String::new()),
    };
    art.csv(&format!(
        "name,value,lo,hi\n{},{value},{lo},{hi}\n",
        rec.name
    ))?;
    art.json(&rec)?;
    match rec.value {
        ConstantValue::Point(v) => println!("{v:?}"),
        ConstantValue::Interval([a, b]) => println!("[{a:?}, {b:?}]"),
        ConstantValue::Unknown(_) => println!("unknown"),
    }
    print!("{}", art.json_text(&rec)?);
    report(&art);
    Ok(())
}

fn first_alpha(params: &Params) -> Res<f64> {
    Ok(params
        .list::<f64>("alpha")?
        .and_then(|a| a.first().copied())
        .unwrap_or(0.0))
}

fn norm_spec(params: &Params) -> Res<NormSpec> {
    let norm: String = params.get("norm")?;
    let q: f64 = params.get("q")?;
    let n = match norm.as_str() {
        "sup" => NormSpec::sup(),
        "weighted-sup" => NormSpec::weighted_sup(params.get("norm_alpha")?),
        "lq" => NormSpec::lq(q, weight(params)?)?,
        "integrated-lq" => NormSpec::integrated_lq(q, weight(params)?)?,
        other => {
            return Err(params
                .error(
                    "norm",
                    format!("unknown norm `{other}` (sup, weighted-sup, lq, integrated-lq)"),
                )
                .into())
        }
    };
    Ok(n)
}

/// Probabilities at fewer radii than a fit needs.
#[derive(Serialize)]
struct ProbsRecord {
    schema_version: u32,
    spec: ProcessSpec,
    norm: NormSpec,
    seed: SeedSpec,
    estimates: Vec<ProbEstimate>,
    /// Continuous-monitoring oracle, when one exists (Brownian sup on [0, 1]).
    exact: Option<Vec<f64>>,
}

fn smallball(params: &Params) -> Res<()> {
    let spec = process_spec(params)?;
    let norm = norm_spec(params)?;
    norm.validate(&spec)?;
    let grid = match params.raw("grid") {
        Some("auto") | None => GridRule::default(),
        Some(_) => GridRule::Fixed {
            intervals: params.count("grid")? as usize,
        },
    };
    let estimator = match params.get::<String>("estimator")?.as_str() {
        "auto" => Estimator::Auto,
        "indicator" => Estimator::Indicator,
        "bridge" => Estimator::BrownianBridge,
        e => {
            return Err(params
                .error(
                    "estimator",
                    format!("unknown estimator `{e}` (auto, indicator, bridge)"),
                )
                .into())
        }
    };
    let model = match params.get::<String>("model")?.as_str() {
        "power" => FitModel::PowerOnly,
        "power-log" => FitModel::PowerWithLog,
        m => {
            return Err(params
                .error("model", format!("unknown model `{m}` (power, power-log)"))
                .into())
        }
    };
    let opts = McOptions::new(params.count("paths")?, grid, seed(params)?)
        .with_estimator(estimator)
        .allow_rare(params.flag("allow_rare")?);
    let eps: Option<Vec<f64>> = params.list("eps")?;
    let tau = norm.exponent(&spec);
    let mut art = Artifacts::new(output_dir(params), params);

    match eps {
        Some(eps) if eps.len() < 4 => {
            let estimates = estimate_probs(&spec, &norm, &eps, &opts)?;
            let brownian_sup = spec.is_brownian() && norm == NormSpec::sup();
            let exact = if brownian_sup {
                Some(
                    eps.iter()
                        .map(|&e| brownian_sup_smallball_exact(e))
                        .collect::<fraclab::Result<Vec<_>>>()?,
                )
            } else {
                None
            };
            let mut csv = String::from("epsilon,p_hat,stderr,n_paths,grid_n\n");
            for (i, p) in estimates.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    p.epsilon, p.p_hat, p.stderr, p.n_paths, p.grid_n
                );
                let oracle = exact
                    .as_ref()
                    .map(|x| format!("  exact {:.6e}", x[i]))
                    .unwrap_or_default();
                println!(
                    "eps = {}: p_hat = {:.6e} ± {:.2e}{oracle}",
                    p.epsilon, p.p_hat, p.stderr
                );
                if p.zero_successes {
                    eprintln!(
                        "warning: no successes at eps = {}; 95% upper bound {:.2e}",
                        p.epsilon, p.interval[1]
                    );
                }
            }
            art.csv(&csv)?;
            art.json(&ProbsRecord {
                schema_version: 1,
                spec,
                norm,
                seed: opts.seed,
                estimates,
                exact,
            })?;
        }
        eps => {
            let r = estimate_kappa(&spec, &norm, eps.as_deref(), &opts, model)?;
            art.csv(&r.to_csv())?;
            art.json(&r)?;
            println!(
                "kappa_hat = {:.6} ± {:.6} (R² = {:.5}, {} radii, {} paths, grid {})",
                r.kappa_hat,
                r.kappa_se,
                r.fit_r2,
                r.epsilons.len(),
                r.n_paths,
                r.grid_n
            );
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
    let script = format!(
        "set xlabel 'epsilon^(-1/tau)'\nset ylabel '-log p'\ntau = {tau}\n\
         plot '{csv}' using (($1)**(-1.0/tau)):(-log($2)) with points pt 7 title 'Monte Carlo', \\\n     \
         '{csv}' using (($1)**(-1.0/tau)):(-log($2)):($3/$2) with yerrorbars notitle\n",
        csv = art.csv_name()
    );
    art.plot(&script)?;
    report(&art);
    Ok(())
}

fn lil(params: &Params) -> Res<()> {
    let spec = process_spec(params)?;
    let theorem = match params.get::<String>("theorem")?.as_str() {
        "sup-lil" => Theorem::SupLil,
        "chung" => Theorem::ChungLiminf,
        "integral" => Theorem::IntegralLiminf,
        t => {
            return Err(params
                .error(
                    "theorem",
                    format!("unknown theorem `{t}` (sup-lil, chung, integral)"),
                )
                .into())
        }
    };
    let mut exp = LilExperiment::new(spec, theorem, params.count("replicas")?, seed(params)?)
        .with_spacing(params.get("spacing")?)
        .with_alpha(params.get("chung_alpha")?);
    if let Some(h) = params.list("horizons")? {
        exp = exp.with_horizons(h);
    }
    if let Some(kappa) = params.opt("kappa")? {
        exp = exp.with_kappa(KappaSource::Estimated { kappa });
    }
    let r = lil_lab::run(&exp)?;
    let mut art = Artifacts::new(output_dir(params), params);
    art.csv(&r.to_csv())?;
    art.json(&r)?;
    let script = format!(
        "set logscale x\nset xlabel 'S = log T'\nset ylabel 'statistic / constant'\n\
         plot '{}' using 1:5 with points pt 7 ps 0.5 title 'replicas', 1 with lines title 'limit'\n",
        art.csv_name()
    );
    art.plot(&script)?;
    println!(
        "theory constant {:.6} ({})",
        r.theory_constant, r.constant_source
    );
    for (s, m) in r.experiment.log_horizons.iter().zip(&r.median_ratio) {
        println!("S = {s:>10.3}: median ratio {m:.4}");
    }
    println!(
        "convergence Spearman {:.3} (p = {:.2e})",
        r.convergence_rho, r.convergence_p_value
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    report(&art);
    Ok(())
}

fn urn(params: &Params) -> Res<()> {
    let p = UrnParams::new(
        params.get("p_w")?,
        params.get("p_b")?,
        params.get("w0")?,
        params.get("b0")?,
    )?;
    let checkpoints = params
        .list::<u64>("checkpoints")?
        .unwrap_or_else(default_checkpoints);
    let r = lil_diagnostics(&p, params.count("replicas")?, &checkpoints, &seed(params)?)?;
    let mut art = Artifacts::new(output_dir(params), params);
    art.csv(&r.to_csv())?;
    art.json(&r)?;
    let script = format!(
        "set logscale x\nset xlabel 'n'\nset ylabel 'Y_n / n'\nv = {}\n\
         plot '{}' using 1:($3/$1) with points pt 7 ps 0.5 title 'replicas', v with lines title 'v'\n",
        r.constants.v,
        art.csv_name()
    );
    art.plot(&script)?;
    let last = r.checkpoints.len() - 1;
    println!(
        "rho = {}, v = {:.6}; at n = {}: mean Y_n/n = {:.6} ± {:.1e}",
        r.constants.rho,
        r.constants.v,
        r.checkpoints[last],
        r.mean_y_over_n[last],
        r.se_y_over_n[last]
    );
    println!(
        "median ratios: LIL Y {:.4}, LIL N {:.4}, Chung Y {:.4}, Chung N {:.4}",
        r.median_lil_y_ratio, r.median_lil_n_ratio, r.median_chung_y_ratio, r.median_chung_n_ratio
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    report(&art);
    Ok(())
}

fn verify_all(params: &Params) -> Res<()> {
    let profile: Profile = params
        .get::<String>("profile")?
        .parse()
        .map_err(|e: String| params.error("profile", e))?;
    let ids = params
        .list::<u8>("criteria")?
        .unwrap_or_else(|| ALL_CRITERIA.to_vec());
    if let Some(bad) = ids.iter().find(|i| !ALL_CRITERIA.contains(i)) {
        return Err(params
            .error("criteria", format!("no criterion {bad} (1..=11)"))
            .into());
    }
    let r = verify::run(profile, seed(params)?, &ids);
    let mut art = Artifacts::new(output_dir(params), params);
    let summary = r.summary();
    art.text(&summary)?;
    art.json(&r)?;
    print!("{summary}");
    for (c, t) in r.criteria.iter().zip(&r.elapsed) {
        let budget = budget_seconds(c.id)
            .map(|b| format!(" (budget {b} s)"))
            .unwrap_or_default();
        eprintln!("criterion {:>2}: {t:.1} s{budget}", c.id);
    }
    report(&art);
    if r.all_pass {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}
