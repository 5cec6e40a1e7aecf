use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub bind: String,
    /// Sessions kept in memory; the least recently used is evicted beyond this.
    pub session_cap: usize,
    /// Largest grid a session may ask for, in cells.
    pub max_grid_cells: usize,
    /// Upper bound on autoregressive steps per sampling request.
    pub max_n_prime: usize,
    /// Allowed browser origin. `None` allows any origin.
    pub cors_origin: Option<String>,
    /// Checkpoints to load, each as `id=path`.
    pub checkpoints: Vec<String>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            bind: "127.0.0.1:8080".into(),
            session_cap: 64,
            max_grid_cells: 4096,
            max_n_prime: 1024,
            cors_origin: None,
            checkpoints: Vec::new(),
        }
    }
}

impl ServeConfig {
    /// Applies `SPARSEFIELD_BIND`, `SPARSEFIELD_CHECKPOINTS` (comma separated),
    /// `SPARSEFIELD_SESSION_CAP` and `SPARSEFIELD_CORS_ORIGIN` when set.
    pub fn with_env(self) -> Result<Self, ServiceError> {
        self.with_vars(|k| std::env::var(k).ok())
    }

    pub fn with_vars(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        if let Some(bind) = var("SPARSEFIELD_BIND") {
            self.bind = bind;
        }
        if let Some(list) = var("SPARSEFIELD_CHECKPOINTS") {
            self.checkpoints = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
        }
        if let Some(cap) = var("SPARSEFIELD_SESSION_CAP") {
            self.session_cap = cap
                .parse()
                .map_err(|_| ServiceError::Config(format!("SPARSEFIELD_SESSION_CAP={cap:?} is not a count")))?;
        }
        if let Some(origin) = var("SPARSEFIELD_CORS_ORIGIN") {
            self.cors_origin = Some(origin);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.session_cap == 0 {
            return Err(ServiceError::Config("session_cap must be at least 1".into()));
        }
        if self.max_grid_cells == 0 {
            return Err(ServiceError::Config("max_grid_cells must be at least 1".into()));
        }
        for entry in &self.checkpoints {
            parse_checkpoint_entry(entry)?;
        }
        Ok(())
    }
}

/// Splits `id=path`.
pub fn parse_checkpoint_entry(entry: &str) -> Result<(String, PathBuf), ServiceError> {
    match entry.split_once('=') {
        Some((id, path)) if !id.is_empty() && !path.is_empty() => Ok((id.to_string(), PathBuf::from(path))),
        _ => Err(ServiceError::Config(format!("checkpoint {entry:?} is not of the form id=path"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides() {
        let cfg = ServeConfig::default()
            .with_vars(|k| match k {
                "SPARSEFIELD_BIND" => Some("0.0.0.0:9000".into()),
                "SPARSEFIELD_CHECKPOINTS" => Some("a=/x.pxtf, b=/y.pxtf".into()),
                "SPARSEFIELD_SESSION_CAP" => Some("3".into()),
                _ => None,
            })
            .unwrap();
        assert_eq!(cfg.bind, "0.0.0.0:9000");
        assert_eq!(cfg.checkpoints, vec!["a=/x.pxtf", "b=/y.pxtf"]);
        assert_eq!(cfg.session_cap, 3);
        assert!(cfg.cors_origin.is_none());
    }

    #[test]
    fn bad_cap_is_rejected() {
        let err = ServeConfig::default().with_vars(|k| (k == "SPARSEFIELD_SESSION_CAP").then(|| "lots".into()));
        assert!(err.is_err());
    }

    #[test]
    fn checkpoint_entries() {
        assert_eq!(parse_checkpoint_entry("mnist=a=b").unwrap().1, PathBuf::from("a=b"));
        assert!(parse_checkpoint_entry("nopath").is_err());
        assert!(parse_checkpoint_entry("=x").is_err());
    }
}
