//! `ramsey oracle`: exact two-mode results for desk checks.

use clap::{Args, Subcommand};
use ramsey_core::two_mode::{steering_depth, TwoModeState};
use ramsey_core::Complex64;
use serde::Serialize;

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// `|N⟩|0⟩` after a π/2 pulse.
    Binomial {
        #[command(flatten)]
        common: Common,
    },
    /// Number state `|n_a⟩|N−n_a⟩`; `n_a` defaults to `N/2`.
    Fock {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        na: Option<usize>,
    },
    /// `Σ d_n √binom(N,n) |n⟩|N−n⟩` with `N + 1` coefficients `re[:im]`.
    State {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        d: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Total atom number.
    #[arg(long)]
    pub n: usize,
    /// One-axis-twisting strength χ (rad/s).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub kerr: f64,
    /// Twisting time (s).
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,
    /// Print JSON instead of `key: value` lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub state: String,
    pub n: usize,
    pub cross_moment_re: f64,
    pub cross_moment_im: f64,
    pub cross_moment_abs: f64,
    pub visibility: Option<f64>,
    pub entropy_bits: f64,
    pub spin_squeezing: Option<f64>,
    pub spin_squeezing_note: Option<String>,
    pub depth_bound: f64,
    pub verdict: String,
    pub two_way: bool,
}

impl OracleReport {
    pub fn text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| x.to_string());
        let mut s = String::new();
        s += &format!("state: {} (N = {})\n", self.state, self.n);
        s += &format!("cross_moment: {} {:+}i\n", self.cross_moment_re, self.cross_moment_im);
        s += &format!("abs_cross_moment: {}\n", self.cross_moment_abs);
        s += &format!("visibility: {}\n", opt(self.visibility));
        s += &format!("entropy_bits: {}\n", self.entropy_bits);
        match &self.spin_squeezing_note {
            Some(note) => s += &format!("spin_squeezing: undefined ({note})\n"),
            None => s += &format!("spin_squeezing: {}\n", opt(self.spin_squeezing)),
        }
        s += &format!("depth_bound: {}\n", self.depth_bound);
        s += &format!("verdict: {}\n", self.verdict);
        s += &format!("two_way: {}\n", self.two_way);
        s
    }
}

fn parse_coefficient(s: &str) -> Result<Complex64, String> {
    let mut parts = s.split(':');
    let re = parts.next().unwrap_or("").trim();
    let im = parts.next().unwrap_or("0").trim();
    if parts.next().is_some() {
        return Err(format!("coefficient `{s}`: expected re or re:im"));
    }
    let p = |x: &str| {
        x.parse::<f64>()
            .map_err(|_| format!("coefficient `{s}` is not a number"))
    };
    Ok(Complex64::new(p(re)?, p(im)?))
}

/// Usage errors come back as strings.
pub fn evaluate(cmd: &OracleCommand) -> Result<(OracleReport, bool), String> {
    let (common, label, state) = match cmd {
        OracleCommand::Binomial { common } => (common, "binomial".to_string(), TwoModeState::binomial(common.n)),
        OracleCommand::Fock { common, na } => {
            let na = na.unwrap_or(common.n / 2);
            (common, format!("fock n_a = {na}"), TwoModeState::fock(common.n, na))
        }
        OracleCommand::State { common, d } => {
            let d = d.iter().map(|s| parse_coefficient(s)).collect::<Result<Vec<_>, _>>()?;
            (common, "custom".to_string(), TwoModeState::new(common.n, &d))
        }
    };
    if !(common.kerr.is_finite() && common.time.is_finite()) {
        return Err("--kerr and --time must be finite".into());
    }
    let mut state = state.map_err(|e| e.to_string())?;
    if common.kerr != 0.0 && common.time != 0.0 {
        state = state.kerr_evolve(common.kerr, common.time);
    }
    let cm = state.cross_moment();
    let cert = steering_depth(cm, 0.0);
    let (squeezing, note) = match state.spin_squeezing() {
        Ok(x) => (Some(x), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok((
        OracleReport {
            state: label,
            n: state.total_n(),
            cross_moment_re: cm.re,
            cross_moment_im: cm.im,
            cross_moment_abs: cm.norm(),
            visibility: state.visibility().ok(),
            entropy_bits: state.entanglement_entropy(),
            spin_squeezing: squeezing,
            spin_squeezing_note: note,
            depth_bound: cert.depth_bound,
            verdict: cert.verdict.to_string(),
            two_way: cert.two_way,
        },
        common.json,
    ))
}
