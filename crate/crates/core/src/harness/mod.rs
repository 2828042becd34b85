//! Conformance runner: fixture-driven probes per table column, golden
//! comparison and report rendering.

mod fixtures;
mod report;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameworks::{CheckId, FrameworkError, FrameworkId};
use crate::model::SceneError;

pub use crate::frameworks::Verdict;
pub use fixtures::{
    fixtures_dir, load_fixture, AppRef, CeremonyMode, ContextSpec, Fixture, Probe, ProbeKind,
    FIXTURES_ENV,
};
pub use report::{
    compare_golden, compare_golden_str, golden_path, parse_matrix, parse_report, render_matrix,
    render_report, AttackRecord, Cell, CellDiff, ConformanceReport, Diff, FrameworkAttacks,
    GoldenParseError, Matrix, ReportFormat, Subject, MATRIX_SCHEMA, REPORT_SCHEMA,
};
pub use run::{attack_records, matrix, run_probe, run_suite, run_suite_in};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Browser,
    Native,
    #[serde(rename = "webview")]
    WebView,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Browser, Suite::Native, Suite::WebView];

    pub fn id(self) -> &'static str {
        match self {
            Suite::Browser => "browser",
            Suite::Native => "native",
            Suite::WebView => "webview",
        }
    }

    /// Checks reported for the suite, in table column order.
    pub fn columns(self) -> &'static [CheckId] {
        use CheckId::*;
        match self {
            Suite::Browser => &[
                InteractionRequired,
                DomainMapping,
                HttpsDowngrade,
                BadCert,
                FillOnTransmission,
                ActionStatic,
                ActionDynamic,
                MethodGet,
                CrossOriginIframe,
            ],
            Suite::Native => &[
                InteractionRequired,
                AppToDomain,
                DomainToApp,
                OtherAppAccess,
                WebViewHostAccess,
            ],
            Suite::WebView => &[
                InteractionRequired,
                DomainMapping,
                HttpsDowngrade,
                BadCert,
                WebViewHostAccess,
                FillOnTransmission,
                ActionStatic,
                ActionDynamic,
                MethodGet,
                CrossOriginIframe,
            ],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("fixture missing: {0}")]
    FixtureMissing(PathBuf),
    #[error("bad fixture {path}: {message}")]
    BadFixture { path: PathBuf, message: String },
    #[error("fixture {path}: {source}")]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error("{suite} fixture has no probe for {check}")]
    UncoveredCheck { suite: Suite, check: CheckId },
    #[error("probe for {check} failed under {framework}: {source}")]
    Probe {
        check: CheckId,
        framework: FrameworkId,
        #[source]
        source: FrameworkError,
    },
    #[error(transparent)]
    Attack(#[from] crate::attacks::AttackError),
}
