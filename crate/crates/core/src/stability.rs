//! Paired-run stability experiments.
//!
//! Two problems sharing their supports and cost but differing in the
//! marginals are iterated side by side. At every sweep the harness
//! measures how far apart the two runs actually are, in three senses, and
//! compares each observation with the quantitative bound that the marginal
//! perturbation allows:
//!
//! * Wasserstein-1 between same-index couplings, against a constant times
//!   the summed marginal perturbation (rows `w1_couplings` vs
//!   `thm3_bound`);
//! * Hilbert distance between the potential products `f_n g_n`, against
//!   `8 Lip(c) e^(10 |c|) (W1(pi0, pi0') + W1(pi1, pi1'))` (`dh_fg` vs
//!   `thm15_bound`), with the pointwise witness-gap variant (`lem16_gap`
//!   vs `lem16_bound`, coefficient 4);
//! * the sup-norm of `f_n g_n - f'_n g'_n`, with coefficient 12 and rate
//!   `e^(16 |c|)` (`sup_fg` vs `thm17_bound`).
//!
//! Bounds whose exponential rate overflows `f64` are compared in log
//! space, so a huge-but-finite right-hand side never turns into a
//! spurious infinity test.

use crate::cost::{CostModel, LipProvenance};
use crate::error::{Error, Result};
use crate::hilbert::hilbert_metric_product;
use crate::ipfp::{run_ipfp, SchrodingerProblem};
use crate::w1::{wasserstein1, wasserstein1_coupling};

/// Threshold on the log of a bound above which comparisons move to log
/// space.
const LOG_COMPARE_SWITCH: f64 = 700.0;

/// A nonnegative bound carried both as a value (possibly infinite) and as
/// its logarithm, so that checks stay meaningful when the value
/// overflows.
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    pub value: f64,
    pub log_value: f64,
}

impl BoundValue {
    fn from_log(log_value: f64) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
        }
    }

    /// The bound multiplied by a nonnegative factor; zero wins over
    /// infinity so a zero perturbation always produces the zero bound.
    pub fn scaled(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self {
                value: 0.0,
                log_value: f64::NEG_INFINITY,
            };
        }
        Self {
            value: self.value * factor,
            log_value: self.log_value + factor.ln(),
        }
    }

    /// Does `observed <= bound` hold, evaluated in log space when the
    /// bound is too large to represent directly?
    pub fn dominates(&self, observed: f64) -> bool {
        if observed <= 0.0 {
            return true;
        }
        if self.log_value > LOG_COMPARE_SWITCH {
            observed.ln() <= self.log_value
        } else {
            observed <= self.value
        }
    }
}

fn rate_bound(coefficient: f64, lip: f64, rate: f64, sup_norm: f64) -> BoundValue {
    BoundValue::from_log((coefficient * lip).ln() + rate * sup_norm)
}

/// Constant `C` such that same-index couplings of the paired runs stay
/// within `C` times the summed marginal perturbation:
/// `exp(17 |c|) * (1 + 15 Lip(c) (diam X + diam Y))`.
pub fn theorem3_constant(cost: &CostModel, diam_x: f64, diam_y: f64) -> BoundValue {
    let lip = cost.lip().value;
    let log_value =
        17.0 * cost.sup_norm() + (15.0 * lip * (diam_x + diam_y)).ln_1p();
    BoundValue::from_log(log_value)
}

/// Hilbert-distance bound on the potential products:
/// `8 Lip(c) exp(10 |c|)` times the summed marginal perturbation.
pub fn theorem15_bound(cost: &CostModel, w1_sum: f64) -> BoundValue {
    rate_bound(8.0, cost.lip().value, 10.0, cost.sup_norm()).scaled(w1_sum)
}

/// Pointwise witness-gap bound, coefficient 4, rate `exp(10 |c|)`.
pub fn lemma16_bound(cost: &CostModel, w1_sum: f64) -> BoundValue {
    rate_bound(4.0, cost.lip().value, 10.0, cost.sup_norm()).scaled(w1_sum)
}

/// Sup-norm bound on the potential products, coefficient 12, rate
/// `exp(16 |c|)`.
pub fn theorem17_bound(cost: &CostModel, w1_sum: f64) -> BoundValue {
    rate_bound(12.0, cost.lip().value, 16.0, cost.sup_norm()).scaled(w1_sum)
}

/// Slack allowed on the coupling-distance lower bound (the coupling
/// distance must dominate the matching fixed-marginal distance).
pub const LOWER_BOUND_TOL: f64 = 1e-9;

/// One sweep's worth of observations and bound comparisons.
#[derive(Debug, Clone, Copy)]
pub struct StabilityRow {
    pub n: usize,
    pub w1_couplings: f64,
    pub thm3_bound: f64,
    pub dh_fg: f64,
    pub thm15_bound: f64,
    pub sup_fg: f64,
    pub thm17_bound: f64,
    pub lem16_gap: f64,
    pub lem16_bound: f64,
    pub w1_marginals_sum: f64,
    pub slack3: f64,
    pub slack15: f64,
    pub slack17: f64,
    /// W1 of the marginal pair that this coupling index fits exactly; the
    /// coupling distance can never drop below it.
    pub remark5_lower: f64,
    pub thm3_holds: bool,
    pub thm15_holds: bool,
    pub thm17_holds: bool,
    pub lem16_holds: bool,
    pub lower_bound_holds: bool,
}

impl StabilityRow {
    pub fn all_hold(&self) -> bool {
        self.thm3_holds
            && self.thm15_holds
            && self.thm17_holds
            && self.lem16_holds
            && self.lower_bound_holds
    }
}

/// Instance-level constants echoed at the top of every report.
#[derive(Debug, Clone, Copy)]
pub struct StabilityHeader {
    pub c_constant: f64,
    pub log_c_constant: f64,
    pub lip_value: f64,
    pub lip_provenance: LipProvenance,
    pub sup_norm: f64,
    pub diam_x: f64,
    pub diam_y: f64,
    pub w1_pi0: f64,
    pub w1_pi1: f64,
    pub seed: Option<u64>,
}

impl StabilityHeader {
    /// Lipschitz-dependent checks are advisory when the constant is only
    /// a grid estimate.
    pub fn advisory(&self) -> bool {
        self.lip_provenance == LipProvenance::DiscreteEstimate
    }
}

/// Column header of the stability report CSV.
pub const STABILITY_CSV_HEADER: &str = "n,w1_couplings,thm3_bound,dh_fg,thm15_bound,\
sup_fg,thm17_bound,lem16_gap,lem16_bound,w1_marginals_sum,slack3,slack15,slack17";

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub header: StabilityHeader,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(StabilityRow::all_hold)
    }

    /// `(sweep, check)` for every failed inequality.
    pub fn violations(&self) -> Vec<(usize, &'static str)> {
        let mut out = Vec::new();
        for row in &self.rows {
            if !row.thm3_holds {
                out.push((row.n, "w1_couplings <= thm3_bound"));
            }
            if !row.thm15_holds {
                out.push((row.n, "dh_fg <= thm15_bound"));
            }
            if !row.thm17_holds {
                out.push((row.n, "sup_fg <= thm17_bound"));
            }
            if !row.lem16_holds {
                out.push((row.n, "lem16_gap <= lem16_bound"));
            }
            if !row.lower_bound_holds {
                out.push((row.n, "w1_couplings >= matching marginal w1"));
            }
        }
        out
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.header.seed = Some(seed);
        self
    }

    /// Renders the report: `#`-prefixed metadata, the fixed column
    /// header, then one row per sweep.
    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        out.push_str(&format!("# c_constant = {}\n", h.c_constant));
        out.push_str(&format!("# log_c_constant = {}\n", h.log_c_constant));
        out.push_str(&format!(
            "# lip = {} ({})\n",
            h.lip_value,
            h.lip_provenance.name()
        ));
        out.push_str(&format!("# sup_norm = {}\n", h.sup_norm));
        out.push_str(&format!("# diam_x = {}\n", h.diam_x));
        out.push_str(&format!("# diam_y = {}\n", h.diam_y));
        out.push_str(&format!("# w1_pi0 = {}\n", h.w1_pi0));
        out.push_str(&format!("# w1_pi1 = {}\n", h.w1_pi1));
        if let Some(seed) = h.seed {
            out.push_str(&format!("# seed = {seed}\n"));
        }
        if h.advisory() {
            out.push_str(
                "# advisory = lip is a grid estimate; lip-dependent checks are advisory\n",
            );
        }
        out.push_str(STABILITY_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.w1_couplings,
                r.thm3_bound,
                r.dh_fg,
                r.thm15_bound,
                r.sup_fg,
                r.thm17_bound,
                r.lem16_gap,
                r.lem16_bound,
                r.w1_marginals_sum,
                r.slack3,
                r.slack15,
                r.slack17
            ));
        }
        out
    }
}

fn slack(bound: f64, observed: f64) -> f64 {
    if observed <= 0.0 {
        f64::INFINITY
    } else {
        bound / observed
    }
}

fn check_shared_instance(
    base: &SchrodingerProblem,
    hat: &SchrodingerProblem,
) -> Result<()> {
    if base.x().as_ref() != hat.x().as_ref() || base.y().as_ref() != hat.y().as_ref() {
        return Err(Error::InstanceMismatch(
            "supports differ between the paired problems".to_string(),
        ));
    }
    if base.cost().table() != hat.cost().table() {
        return Err(Error::InstanceMismatch(
            "cost tables differ between the paired problems".to_string(),
        ));
    }
    Ok(())
}

/// Runs both problems for exactly `iters` sweeps and measures every
/// stability quantity at every sweep.
pub fn run_stability_experiment(
    base: &SchrodingerProblem,
    hat: &SchrodingerProblem,
    iters: usize,
) -> Result<StabilityReport> {
    if iters == 0 {
        return Err(Error::BadConfig(
            "stability experiments need at least one sweep".to_string(),
        ));
    }
    check_shared_instance(base, hat)?;
    let x = base.x();
    let y = base.y();
    let diam_x = x.diameter();
    let diam_y = y.diameter();
    let w1_pi0 = wasserstein1(base.pi0(), hat.pi0())?.value();
    let w1_pi1 = wasserstein1(base.pi1(), hat.pi1())?.value();
    let w1_sum = w1_pi0 + w1_pi1;

    let c_constant = theorem3_constant(base.cost(), diam_x, diam_y);
    let thm3 = c_constant.scaled(w1_sum);
    let thm15 = theorem15_bound(base.cost(), w1_sum);
    let lem16 = lemma16_bound(base.cost(), w1_sum);
    let thm17 = theorem17_bound(base.cost(), w1_sum);

    let ta = run_ipfp(base, iters, 0.0)?;
    let tb = run_ipfp(hat, iters, 0.0)?;

    let mut rows = Vec::with_capacity(iters);
    for n in 1..=iters {
        let pa = ta.pair(n).expect("full-length run");
        let pb = tb.pair(n).expect("full-length run");

        let ca = ta.coupling(base, n)?;
        let cb = tb.coupling(hat, n)?;
        let w1_c = wasserstein1_coupling(&ca, &cb, x, y)?;
        let remark5_lower = if n % 2 == 1 { w1_pi0 } else { w1_pi1 };

        let product = hilbert_metric_product(&pa.f(), &pb.f(), &pa.g(), &pb.g())?;
        if (product.grid - product.factor_sum).abs()
            > 1e-9 * (1.0 + product.grid.abs())
        {
            return Err(Error::SolverFailure(format!(
                "product Hilbert distance disagrees with its factor sum at sweep {n}"
            )));
        }
        let dh_fg = product.grid;

        let mut sup_fg = 0.0f64;
        let mut lem16_gap = f64::INFINITY;
        for (i, &phi_a) in pa.phi().iter().enumerate() {
            let phi_b = pb.phi()[i];
            for (j, &psi_a) in pa.psi().iter().enumerate() {
                let psi_b = pb.psi()[j];
                let diff = ((phi_a + psi_a).exp() - (phi_b + psi_b).exp()).abs();
                if diff > sup_fg {
                    sup_fg = diff;
                }
                let gap = (((phi_a - phi_b) + (psi_a - psi_b)).exp() - 1.0).abs();
                if gap < lem16_gap {
                    lem16_gap = gap;
                }
            }
        }

        rows.push(StabilityRow {
            n,
            w1_couplings: w1_c,
            thm3_bound: thm3.value,
            dh_fg,
            thm15_bound: thm15.value,
            sup_fg,
            thm17_bound: thm17.value,
            lem16_gap,
            lem16_bound: lem16.value,
            w1_marginals_sum: w1_sum,
            slack3: slack(thm3.value, w1_c),
            slack15: slack(thm15.value, dh_fg),
            slack17: slack(thm17.value, sup_fg),
            remark5_lower,
            thm3_holds: thm3.dominates(w1_c),
            thm15_holds: thm15.dominates(dh_fg),
            thm17_holds: thm17.dominates(sup_fg),
            lem16_holds: lem16.dominates(lem16_gap),
            lower_bound_holds: w1_c >= remark5_lower - LOWER_BOUND_TOL,
        });
    }

    Ok(StabilityReport {
        header: StabilityHeader {
            c_constant: c_constant.value,
            log_c_constant: c_constant.log_value,
            lip_value: base.cost().lip().value,
            lip_provenance: base.cost().lip().provenance,
            sup_norm: base.cost().sup_norm(),
            diam_x,
            diam_y,
            w1_pi0,
            w1_pi1,
            seed: None,
        },
        rows,
    })
}

/// Outcome of iterating both problems to convergence and comparing the
/// identified limit couplings.
#[derive(Debug, Clone, Copy)]
pub struct BridgeStability {
    /// W1 between the two converged even couplings.
    pub w1_limits: f64,
    /// `C * (W1(pi0, pi0') + W1(pi1, pi1'))` plus the marginal-error
    /// budget `(diam X + diam Y) * (err + err')`.
    pub bound: f64,
    pub holds: bool,
    pub sweeps_base: usize,
    pub sweeps_hat: usize,
    pub marginal_err_base: f64,
    pub marginal_err_hat: f64,
}

/// Iteration cap for [`bridge_stability`].
const BRIDGE_SWEEP_CAP: usize = 100_000;

/// Runs both problems until their fitted-marginal error drops below
/// `tol`, then compares the converged even couplings against the
/// stability bound. The residual marginal errors enter the bound scaled
/// by the product diameter, since that is the farthest the leftover mass
/// can sit from where it belongs.
pub fn bridge_stability(
    base: &SchrodingerProblem,
    hat: &SchrodingerProblem,
    tol: f64,
) -> Result<BridgeStability> {
    check_shared_instance(base, hat)?;
    let ta = run_ipfp(base, BRIDGE_SWEEP_CAP, tol)?;
    let tb = run_ipfp(hat, BRIDGE_SWEEP_CAP, tol)?;
    let (na, nb) = match (ta.converged(), tb.converged()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let err = ta
                .diagnostics()
                .last()
                .map(|d| d.marginal_err)
                .unwrap_or(f64::NAN);
            return Err(Error::NonConvergence {
                max_iters: BRIDGE_SWEEP_CAP,
                error: err,
            });
        }
    };
    let err_a = ta.diagnostics()[na - 1].marginal_err;
    let err_b = tb.diagnostics()[nb - 1].marginal_err;
    let ca = ta.coupling(base, 2 * na)?;
    let cb = tb.coupling(hat, 2 * nb)?;
    let x = base.x();
    let y = base.y();
    let w1_limits = wasserstein1_coupling(&ca, &cb, x, y)?;

    let diam_x = x.diameter();
    let diam_y = y.diameter();
    let w1_pi0 = wasserstein1(base.pi0(), hat.pi0())?.value();
    let w1_pi1 = wasserstein1(base.pi1(), hat.pi1())?.value();
    let budget = (diam_x + diam_y) * (err_a + err_b);
    let scaled = theorem3_constant(base.cost(), diam_x, diam_y).scaled(w1_pi0 + w1_pi1);
    let bound = scaled.value + budget;
    let holds = scaled.dominates((w1_limits - budget).max(0.0));
    Ok(BridgeStability {
        w1_limits,
        bound,
        holds,
        sweeps_base: na,
        sweeps_hat: nb,
        marginal_err_base: err_a,
        marginal_err_hat: err_b,
    })
}
