//! Core domain types and the scene file format.

mod app;
mod credential;
mod domain;
mod scene;

use serde::{Deserialize, Serialize};

pub use app::{fingerprint, AppIdentity, Fingerprint, IdentityError, PackageId, StoreMetadata};
pub use credential::{
    credentials_for, credentials_for_domain, Credential, CredentialId, ManualMapping, Secret, Vault,
};
pub use domain::{
    ConnectionSecurity, DomainError, DomainName, Origin, SecurityKind, PUBLIC_SUFFIXES,
};
pub use scene::{
    load_scene, render_scene, AssociationSource, DocumentBody, DocumentSource, DomainEntry, Scene,
    SceneError, APPLE_ASSOCIATION_PATH, DAL_ASSOCIATION_PATH,
};

/// How the simulated user answers every autofill prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserAgent {
    AlwaysApprove,
    AlwaysDeny,
}

impl UserAgent {
    pub fn approves(self) -> bool {
        self == UserAgent::AlwaysApprove
    }
}
