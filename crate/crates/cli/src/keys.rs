//! Every configuration key, per section. The same table drives `--help`,
//! the command-line flags and config-file validation.

pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
    }
}

pub const SUBCOMMANDS: [&str; 6] = [
    "sample",
    "formulas",
    "smallball",
    "lil",
    "urn",
    "verify-all",
];

/// Keys valid in every subcommand (section `[common]`).
pub const COMMON: &[Key] = &[
    key("seed", Some("20240601"), "master seed"),
    key(
        "stream",
        Some("0"),
        "stream id (independent families under one seed)",
    ),
    key(
        "workers",
        Some("0"),
        "worker threads, 0 = all cores; never changes results",
    ),
    key(
        "out",
        None,
        "output directory [default: $FRACLAB_OUT, else ./fraclab-out]",
    ),
    key(
        "name",
        None,
        "file stem of the outputs [default: the subcommand]",
    ),
];

const PROCESS: &[Key] = &[
    key(
        "process",
        Some("brownian"),
        "base process: brownian | fbm | rl | integrated-brownian",
    ),
    key("H", None, "Hurst index (fbm)"),
    key("lambda", None, "Riemann-Liouville index (rl)"),
    key(
        "gamma",
        Some("0"),
        "fractional smoothing order applied to fbm",
    ),
    key(
        "alpha",
        None,
        "weights of the integration chain, comma separated",
    ),
];

const SAMPLE: &[Key] = &[
    key("paths", Some("4"), "number of paths"),
    key("grid", Some("1024"), "grid intervals"),
    key("t1", Some("1"), "right end of the time interval"),
];

const FORMULAS: &[Key] = &[
    key(
        "which",
        None,
        "a_H | sigma2_W | sigma2_B0 | sigma2_general | r_lambda | r_rec | sigma_tilde2_B | \
         sigma_tilde2_W | chung_constant | lil_constant | kappa_known | lq_constant | w_norm",
    ),
    key("H", None, "Hurst index"),
    key("lambda", None, "Riemann-Liouville index"),
    key("gamma", Some("0"), "fractional smoothing order"),
    key("alpha", None, "weights, comma separated"),
    key("h", None, "lag"),
    key("tau", None, "self-similarity index"),
    key("kappa", None, "small-ball constant"),
    key("q", Some("inf"), "norm exponent (inf = sup-norm)"),
    key("factor", Some("1"), "normalisation factor of lil_constant"),
    key("r", None, "exponent of w_norm"),
    key(
        "weight",
        Some("0,1"),
        "indicator weight on [a,b], given as a,b",
    ),
    key(
        "mode",
        Some("process"),
        "lq_constant mode: process | integrated",
    ),
];

const SMALLBALL: &[Key] = &[
    key(
        "norm",
        Some("sup"),
        "sup | weighted-sup | lq | integrated-lq",
    ),
    key("norm_alpha", Some("0"), "exponent of the weighted sup-norm"),
    key("q", Some("2"), "exponent of the Lq norms"),
    key(
        "weight",
        Some("0,1"),
        "indicator weight on [a,b] for the Lq norms, given as a,b",
    ),
    key(
        "eps",
        None,
        "radii, comma separated [default: automatic ladder]",
    ),
    key("paths", Some("100000"), "Monte Carlo paths"),
    key("grid", Some("auto"), "grid intervals, or auto"),
    key("estimator", Some("auto"), "auto | indicator | bridge"),
    key("model", Some("power"), "kappa fit: power | power-log"),
    key(
        "allow_rare",
        Some("false"),
        "accept probabilities below 1e-4",
    ),
];

const LIL: &[Key] = &[
    key("theorem", Some("sup-lil"), "sup-lil | chung | integral"),
    key("replicas", Some("50"), "independent replicas"),
    key(
        "horizons",
        None,
        "log-time horizons S = log T, comma separated [default: per theorem]",
    ),
    key("spacing", Some("0.02"), "log-time step"),
    key("chung_alpha", Some("0"), "alpha of the Chung statistic"),
    key(
        "kappa",
        None,
        "small-ball constant for the Chung statistic [default: known value]",
    ),
];

const URN: &[Key] = &[
    key(
        "p_w",
        None,
        "probability of adding a white ball after drawing white",
    ),
    key(
        "p_b",
        None,
        "probability of adding a black ball after drawing black",
    ),
    key("w0", Some("1"), "initial white balls"),
    key("b0", Some("1"), "initial black balls"),
    key("replicas", Some("100"), "independent trajectories"),
    key(
        "checkpoints",
        None,
        "stages to record, comma separated [default: 2^10..2^20 and 10^6]",
    ),
];

const VERIFY: &[Key] = &[
    key("profile", Some("full"), "full | quick | smoke"),
    key(
        "criteria",
        None,
        "criteria to run, comma separated [default: all]",
    ),
];

/// Section-specific keys of a subcommand, in help order.
pub fn section_keys(sub: &str) -> Vec<&'static Key> {
    let parts: &[&[Key]] = match sub {
        "sample" => &[PROCESS, SAMPLE],
        "formulas" => &[FORMULAS],
        "smallball" => &[PROCESS, SMALLBALL],
        "lil" => &[PROCESS, LIL],
        "urn" => &[URN],
        "verify-all" => &[VERIFY],
        _ => &[],
    };
    parts.iter().flat_map(|p| p.iter()).collect()
}

pub fn about(sub: &str) -> &'static str {
    match sub {
        "sample" => "sample paths of a process on a uniform grid",
        "formulas" => "evaluate one closed-form constant",
        "smallball" => "small-ball probabilities and the decay constant kappa",
        "lil" => "law-of-the-iterated-logarithm experiments",
        "urn" => "randomized play-the-winner urn diagnostics",
        "verify-all" => "run the acceptance suite; exit 0 iff every criterion passes",
        _ => "",
    }
}
