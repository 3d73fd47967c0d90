//! Named numerical tolerances with their default values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every threshold used by the audits. Defaults are the values each check
/// is specified with; overrides are recorded by callers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Generic absolute equality of operators and probabilities.
    pub equality: f64,
    /// POVM element positivity and completeness.
    pub povm: f64,
    /// Branches less likely than this are impossible and carry no state.
    pub branch_cutoff: f64,
    /// Purity defect accepted when factoring a teleported branch.
    pub purity: f64,
    /// Fidelity defect accepted by the perfect-teleportation precondition.
    pub perfect_fidelity: f64,
    /// Fidelity defect for teleported and residual states.
    pub fidelity: f64,
    /// Port-state mixture decomposition residual.
    pub decomposition: f64,
    /// Inner-product preservation of failure states.
    pub overlap: f64,
    /// Pauli twirl against the maximally mixed state.
    pub twirl: f64,
    /// Success probabilities of a protocol and its twirled version.
    pub success_invariance: f64,
    /// Guessing probability against `4^-n`.
    pub signaling: f64,
    /// Slack allowed above the analytic success bound.
    pub bound_slack: f64,
    /// Fidelity defect accepted when certifying optimizer output.
    pub certify_fidelity: f64,
    /// Constraint residual accepted when certifying optimizer output.
    pub certify_constraint: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equality: 1e-10,
            povm: 1e-10,
            branch_cutoff: 1e-12,
            purity: 1e-8,
            perfect_fidelity: 1e-8,
            fidelity: 1e-10,
            decomposition: 1e-10,
            overlap: 1e-8,
            twirl: 1e-12,
            success_invariance: 1e-12,
            signaling: 1e-10,
            bound_slack: 1e-8,
            certify_fidelity: 1e-6,
            certify_constraint: 1e-8,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 14] = [
        "equality",
        "povm",
        "branch_cutoff",
        "purity",
        "perfect_fidelity",
        "fidelity",
        "decomposition",
        "overlap",
        "twirl",
        "success_invariance",
        "signaling",
        "bound_slack",
        "certify_fidelity",
        "certify_constraint",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "equality" => &mut self.equality,
            "povm" => &mut self.povm,
            "branch_cutoff" => &mut self.branch_cutoff,
            "purity" => &mut self.purity,
            "perfect_fidelity" => &mut self.perfect_fidelity,
            "fidelity" => &mut self.fidelity,
            "decomposition" => &mut self.decomposition,
            "overlap" => &mut self.overlap,
            "twirl" => &mut self.twirl,
            "success_invariance" => &mut self.success_invariance,
            "signaling" => &mut self.signaling,
            "bound_slack" => &mut self.bound_slack,
            "certify_fidelity" => &mut self.certify_fidelity,
            "certify_constraint" => &mut self.certify_constraint,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Format {
                path: format!("tolerance.{name}"),
                message: format!("must be a positive finite number, got {value}"),
            });
        }
        let slot = self.slot(name).ok_or_else(|| Error::Format {
            path: format!("tolerance.{name}"),
            message: format!("unknown tolerance; expected one of {}", Self::NAMES.join(", ")),
        })?;
        *slot = value;
        Ok(())
    }

    /// Parses `name=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<(String, f64)> {
        let (name, value) = spec.split_once('=').ok_or_else(|| Error::Format {
            path: "tolerance".into(),
            message: format!("expected name=value, got `{spec}`"),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::Format {
            path: format!("tolerance.{name}"),
            message: format!("`{value}` is not a number"),
        })?;
        self.set(name.trim(), value)?;
        Ok((name.trim().to_string(), value))
    }
}
