//! The `bounds`, `compare` and `simulate` commands as functions returning rows.

use std::fmt;

use hoeffding_core::bounds::{
    bound_azuma_refined, bound_b1, bound_b2, bound_courbot, bound_f, bound_fuk_nagaev,
    bound_haeusler, bound_hn, bound_hoeffding_ho11, bound_prohorov, Regime,
};
use hoeffding_core::cumulant::{check_cdwe, lambda_star_freedman};
use hoeffding_core::montecarlo::{tightness_ratio, verify_bound, Estimate};
use hoeffding_core::{
    Error, EventSpec, EventVariant, IncrementLaw, LogProb, TailQuery, Tilt, TruncationQuery,
    Verdict,
};
use serde_json::{json, Value};

use crate::grid::GridPoint;
use crate::output::{number, Row};
use crate::parallel;

/// Failure of a command before any result is produced; maps to exit status 2.
#[derive(Debug)]
pub enum CommandError {
    Invalid(String),
    Io(std::io::Error),
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::Invalid(m) => f.write_str(m),
            CommandError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        CommandError::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

/// Log-space slack for ordering claims between bounds.
pub const ORDERING_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundValue {
    pub name: &'static str,
    pub log: LogProb,
    pub branch: Option<String>,
}

impl BoundValue {
    fn new(name: &'static str, log: LogProb) -> Self {
        BoundValue {
            name,
            log,
            branch: None,
        }
    }

    fn with_branch(mut self, branch: impl Into<String>) -> Self {
        self.branch = Some(branch.into());
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "log_value": number(self.log.log_value()),
            "value": number(self.log.value()),
            "branch": self.branch,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRequest {
    pub x: f64,
    pub v: f64,
    pub n: u64,
    pub b: Option<f64>,
    pub y: Option<f64>,
    /// Supplies the exact tail terms of the truncated bounds.
    pub law: Option<IncrementLaw>,
}

/// `H_n`, `F`, `B1`, `B2` and Prohorov for `(x, v, n)`.
pub fn core_bounds(q: &TailQuery) -> Result<Vec<BoundValue>, Error> {
    let (x, v) = (q.x(), q.v());
    Ok(vec![
        BoundValue::new("H_n", bound_hn(q)),
        BoundValue::new("F", bound_f(x, v)?),
        BoundValue::new("B1", bound_b1(x, v)?),
        BoundValue::new("B2", bound_b2(x, v)?),
        BoundValue::new("Prohorov", bound_prohorov(x, v)?),
    ])
}

/// Every bound that applies to the request.
pub fn all_bounds(req: &BoundsRequest) -> Result<Vec<BoundValue>, CommandError> {
    let q = TailQuery::new(req.x, req.v, req.n)?;
    let mut out = core_bounds(&q)?;
    if let Some(b) = req.b {
        let tq = TruncationQuery::new(q).with_b(b)?;
        let (azuma, branch) = bound_azuma_refined(&tq)?;
        out.push(BoundValue::new("Azuma_refined", azuma).with_branch(branch.as_str()));
        out.push(BoundValue::new(
            "Ho11",
            bound_hoeffding_ho11(&tq, Regime::Martingale)?,
        ));
    }
    if let Some(y) = req.y {
        let tq = TruncationQuery::new(q).with_y(y)?;
        let (per_step, p_max, p_qc, tail) = match &req.law {
            Some(law) => {
                let (per_step, p_max) = law.exceedance_tail(y, req.n)?;
                let over_budget = req.n as f64 * law.conditional_variance() > q.v2();
                (per_step, p_max, if over_budget { 1.0 } else { 0.0 }, "law")
            }
            None => (0.0, 0.0, 0.0, "none"),
        };
        let fuk = bound_fuk_nagaev(&tq, p_max)?;
        out.push(BoundValue::new("Fuk_Nagaev", fuk.total).with_branch(format!("tail={tail}")));
        let courbot = bound_courbot(req.x, y, req.v, req.n as f64 * per_step, p_qc)?;
        out.push(BoundValue::new("Courbot", courbot).with_branch(format!("tail={tail}")));
        if req.x > 0.0 {
            out.push(BoundValue::new(
                "Haeusler",
                bound_haeusler(req.x, y, req.v)?,
            ));
        }
    }
    Ok(out)
}

pub fn bounds_rows(req: &BoundsRequest, bounds: &[BoundValue]) -> Vec<Row> {
    bounds
        .iter()
        .map(|bv| Row {
            x: Some(req.x),
            v: Some(req.v),
            n: Some(req.n),
            b: req.b,
            y: req.y,
            bound_name: bv.name.to_string(),
            log_value: Some(bv.log.log_value()),
            value: Some(bv.log.value()),
            branch: bv.branch.clone(),
            ..Row::default()
        })
        .collect()
}

pub fn bounds_json(req: &BoundsRequest, bounds: &[BoundValue]) -> Value {
    json!({
        "query": {
            "x": number(req.x),
            "v": number(req.v),
            "n": req.n,
            "b": req.b.map(number),
            "y": req.y.map(number),
            "law": req.law.as_ref().map(|l| l.to_string()),
        },
        "bounds": bounds.iter().map(BoundValue::to_json).collect::<Vec<_>>(),
    })
}

/// `lhs <= rhs` in log-space with [`ORDERING_SLACK`].
pub fn ordered(lhs: LogProb, rhs: LogProb) -> bool {
    lhs.log_value() <= rhs.log_value() + ORDERING_SLACK
}

/// Bound rows for each point followed by one row per ordering claim.
pub struct Comparison {
    pub rows: Vec<Row>,
    pub violations: Vec<String>,
}

pub fn compare(grid: &[GridPoint]) -> Result<Comparison, CommandError> {
    let mut rows = Vec::with_capacity(grid.len() * 10);
    let mut violations = Vec::new();
    for p in grid {
        let q = TailQuery::new(p.x, p.v, p.n)?;
        let bounds = core_bounds(&q)?;
        let req = BoundsRequest {
            x: p.x,
            v: p.v,
            n: p.n,
            b: None,
            y: None,
            law: None,
        };
        rows.extend(bounds_rows(&req, &bounds));
        let get = |name: &str| {
            bounds
                .iter()
                .find(|b| b.name == name)
                .map(|b| b.log)
                .unwrap_or(LogProb::ONE)
        };
        let next = bound_hn(&TailQuery::new(p.x, p.v, p.n + 1)?);
        let claims = [
            ("H_n<=F", get("H_n"), get("F")),
            ("F<=B1", get("F"), get("B1")),
            ("B1<=B2", get("B1"), get("B2")),
            ("H_n<=Prohorov", get("H_n"), get("Prohorov")),
            ("H_n<=H_n+1", get("H_n"), next),
        ];
        for (name, lhs, rhs) in claims {
            let ok = ordered(lhs, rhs);
            if !ok {
                violations.push(format!(
                    "{name} fails at x={:?} v={:?} n={}: {:?} > {:?}",
                    p.x,
                    p.v,
                    p.n,
                    lhs.log_value(),
                    rhs.log_value()
                ));
            }
            rows.push(Row {
                x: Some(p.x),
                v: Some(p.v),
                n: Some(p.n),
                bound_name: name.to_string(),
                verdict: Some(if ok { "pass" } else { "fail" }.to_string()),
                ..Row::default()
            });
        }
    }
    Ok(Comparison { rows, violations })
}

pub fn parse_event(name: &str, y: Option<f64>) -> Result<EventVariant, CommandError> {
    Ok(match name {
        "stopped" => EventVariant::StoppedAnyK,
        "max_final_qc" => EventVariant::MaxWithFinalQC,
        "final" => EventVariant::FinalOnly,
        "truncated" => EventVariant::TruncatedAnyK {
            y: y.ok_or_else(|| CommandError::Invalid("event `truncated` needs --y".into()))?,
        },
        other => {
            return Err(CommandError::Invalid(format!(
                "unknown event {other:?}, expected stopped, max_final_qc, final or truncated"
            )))
        }
    })
}

pub fn parse_law(text: &str) -> Result<IncrementLaw, CommandError> {
    text.parse::<IncrementLaw>()
        .map_err(|e| CommandError::Invalid(format!("law {text:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRequest {
    pub law: IncrementLaw,
    pub variant: EventVariant,
    pub x: f64,
    pub v: f64,
    pub n: u64,
    /// Lower support magnitude for the bounded-difference bounds; defaults to `-inf supp`.
    pub b: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub gamma: f64,
}

const MEAN_TOLERANCE: f64 = 1e-12;
const CDWE_GRID_POINTS: usize = 64;

/// Bounds whose hypotheses the law and event satisfy, each tagged with its justification.
pub fn applicable_bounds(req: &SimulationRequest) -> Result<Vec<BoundValue>, CommandError> {
    let law = &req.law;
    let supermartingale = law.mean() <= MEAN_TOLERANCE;
    let martingale = law.mean().abs() <= MEAN_TOLERANCE;
    let bounded_above = law.support_max() <= 1.0 + MEAN_TOLERANCE;
    let truncated = matches!(req.variant, EventVariant::TruncatedAnyK { .. });
    let q = TailQuery::new(req.x, req.v, req.n)?;
    let mut out = Vec::new();
    if !supermartingale {
        return Ok(out);
    }
    if bounded_above && !truncated {
        out.extend(
            core_bounds(&q)?
                .into_iter()
                .map(|b| b.with_branch("bounded_above")),
        );
    }
    if bounded_above {
        let b = req.b.unwrap_or(-law.support_min());
        if b > 0.0 && b.is_finite() {
            let regime = if martingale {
                Regime::Martingale
            } else {
                Regime::Supermartingale
            };
            let tq = TruncationQuery::new(q).with_b(b)?;
            if regime == Regime::Martingale || b <= 1.0 {
                let (azuma, branch) = bound_azuma_refined(&tq)?;
                out.push(BoundValue::new("Azuma_refined", azuma).with_branch(branch.as_str()));
                let tag = if martingale {
                    "martingale"
                } else {
                    "supermartingale"
                };
                out.push(
                    BoundValue::new("Ho11", bound_hoeffding_ho11(&tq, regime)?).with_branch(tag),
                );
            }
        }
    } else if !truncated {
        // Freedman's bound needs the moment condition only up to the optimal tilt.
        let star = lambda_star_freedman(req.x, req.v)?.lambda();
        let grid: Vec<Tilt> = (0..=CDWE_GRID_POINTS)
            .map(|i| Tilt::new(star * i as f64 / CDWE_GRID_POINTS as f64))
            .collect::<Result<_, _>>()?;
        if check_cdwe(law, &grid)? {
            out.push(BoundValue::new("F", bound_f(req.x, req.v)?).with_branch("cdwe"));
        }
    }
    if let EventVariant::TruncatedAnyK { y } = req.variant {
        let (_, p_max) = law.exceedance_tail(y, req.n)?;
        let tq = TruncationQuery::new(q).with_y(y)?;
        out.push(
            BoundValue::new("Fuk_Nagaev", bound_fuk_nagaev(&tq, p_max)?.total)
                .with_branch("tail=law"),
        );
    }
    Ok(out)
}

pub struct SimulationReport {
    pub request: SimulationRequest,
    pub estimate: Estimate,
    pub bounds: Vec<(BoundValue, Verdict, Option<f64>)>,
}

impl SimulationReport {
    pub fn flagged(&self) -> bool {
        self.bounds.iter().any(|(_, v, _)| *v == Verdict::Flag)
    }

    pub fn to_json(&self) -> Value {
        let r = &self.request;
        let e = &self.estimate;
        let y = match r.variant {
            EventVariant::TruncatedAnyK { y } => Some(number(y)),
            _ => None,
        };
        json!({
            "law": r.law.to_string(),
            "event": r.variant.as_str(),
            "x": number(r.x),
            "v": number(r.v),
            "n": r.n,
            "b": r.b.map(number),
            "y": y,
            "trials": e.trials,
            "seed": e.seed,
            "gamma": number(e.gamma),
            "hits": e.hits,
            "p_hat": number(e.p_hat),
            "ci_low": number(e.ci_low),
            "ci_high": number(e.ci_high),
            "one_sided": (e.hits == 0).then(|| format!("p <= {:e}", e.ci_high)),
            "bounds": self.bounds.iter().map(|(b, verdict, ratio)| {
                let mut j = b.to_json();
                j["verdict"] = json!(verdict.as_str());
                j["tightness"] = ratio.map_or(Value::Null, number);
                j
            }).collect::<Vec<_>>(),
            "verdict": if self.flagged() { "flag" } else { "pass" },
        })
    }

    pub fn rows(&self) -> Vec<Row> {
        let r = &self.request;
        let e = &self.estimate;
        let y = match r.variant {
            EventVariant::TruncatedAnyK { y } => Some(y),
            _ => None,
        };
        let base = Row {
            x: Some(r.x),
            v: Some(r.v),
            n: Some(r.n),
            b: r.b,
            y,
            p_hat: Some(e.p_hat),
            ci_low: Some(e.ci_low),
            ci_high: Some(e.ci_high),
            seed: Some(e.seed),
            ..Row::default()
        };
        let mut rows = vec![Row {
            bound_name: "estimate".into(),
            branch: Some(r.variant.as_str().into()),
            ..base.clone()
        }];
        rows.extend(self.bounds.iter().map(|(b, verdict, _)| Row {
            bound_name: b.name.into(),
            log_value: Some(b.log.log_value()),
            value: Some(b.log.value()),
            branch: b.branch.clone(),
            verdict: Some(verdict.as_str().into()),
            ..base.clone()
        }));
        rows
    }
}

pub fn simulate(req: &SimulationRequest) -> Result<SimulationReport, CommandError> {
    let spec = EventSpec::new(req.x, req.v, req.variant)?;
    let set = parallel::estimate_events(&req.law, &[spec], req.n, req.trials, req.seed, req.gamma)?;
    let estimate = set.estimates.into_iter().next().expect("one spec");
    let bounds = applicable_bounds(req)?
        .into_iter()
        .map(|b| {
            let verdict = verify_bound(&estimate, b.log);
            let ratio = tightness_ratio(&estimate, b.log).ok();
            (b, verdict, ratio)
        })
        .collect();
    Ok(SimulationReport {
        request: req.clone(),
        estimate,
        bounds,
    })
}
