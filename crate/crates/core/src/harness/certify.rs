//! Fixture-to-certificate pipeline behind the `certify` subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::write_atomic;
use crate::error::{Error, Result};
use crate::pomdp::{
    certify_dominance, check_assumption, q_value_iteration, AssumptionReport, Certificate,
    PomdpFixture, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Pass,
    Fail,
    AssumptionNotMet,
}

impl CertificateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::AssumptionNotMet => "assumption not met",
        }
    }
}

/// What `certify` writes to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub fixture: PathBuf,
    pub status: CertificateStatus,
    pub discount: f64,
    pub assumption: AssumptionReport,
    /// Absent when the premises fail.
    pub certificate: Option<Certificate>,
}

/// Loads a fixture, optionally replaces its discount, checks the premises
/// and, when they hold, solves and certifies.
pub fn certify_fixture(
    path: &Path,
    discount: Option<f64>,
    options: SolverOptions,
) -> Result<CertificateFile> {
    let fixture = PomdpFixture::load(path)?;
    let (mut pomdp, rewards, spec) = fixture.build()?;
    let spec = spec.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: "dominance: block missing; certify needs task_actions, wirehead_action and r_task"
            .into(),
    })?;
    if let Some(g) = discount {
        pomdp = pomdp.with_discount(g)?;
    }
    let assumption = check_assumption(&pomdp, &rewards, &spec)?;
    let (status, certificate) = if assumption.holds() {
        let q = q_value_iteration(&pomdp, &rewards, options)?;
        let cert = certify_dominance(&q, &spec, &assumption, options.tolerance)?;
        let status = if cert.passed {
            CertificateStatus::Pass
        } else {
            CertificateStatus::Fail
        };
        (status, Some(cert))
    } else {
        (CertificateStatus::AssumptionNotMet, None)
    };
    Ok(CertificateFile {
        fixture: path.to_path_buf(),
        status,
        discount: pomdp.discount(),
        assumption,
        certificate,
    })
}

impl CertificateFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("certificate serialises");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    /// Human-readable summary for the console.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "fixture:   {}", self.fixture.display());
        let _ = writeln!(s, "discount:  {}", self.discount);
        let _ = writeln!(s, "status:    {}", self.status.as_str());
        let a = &self.assumption;
        for (name, check) in [
            ("manipulation", &a.manipulation),
            ("task limit", &a.task_limit),
            ("availability", &a.availability),
        ] {
            let _ = write!(
                s,
                "  {name:<13} {}",
                if check.holds { "ok" } else { "violated" }
            );
            if let Some(v) = check.violations.first() {
                let _ = write!(
                    s,
                    " (state {}, action {}, value {}; {} total)",
                    v.state,
                    v.action,
                    v.value,
                    check.violations.len()
                );
            }
            s.push('\n');
        }
        if let Some(c) = &self.certificate {
            let _ = writeln!(
                s,
                "min gap:   {} at state {}, action {}",
                c.min_gap, c.witness_state, c.witness_action
            );
            let _ = writeln!(s, "1 - r_task: {}", c.gap_bound);
            let _ = writeln!(s, "slack:     {}", c.slack);
            let _ = writeln!(
                s,
                "Q(a_w) error: {} ({})",
                c.wirehead_value_error,
                if c.wirehead_value_ok {
                    "within slack"
                } else {
                    "exceeds slack"
                }
            );
            let _ = writeln!(s, "iterations: {}, residual {}", c.iterations, c.residual);
        }
        s
    }
}
