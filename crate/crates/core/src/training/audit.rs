use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How a stage used a set of record ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// Parameters were fitted on these ids.
    Fit,
    /// These ids scored candidates during selection.
    Select,
    /// Held-out evaluation only.
    Evaluate,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Fit => "fit",
            Role::Select => "select",
            Role::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IdEvent {
    pub stage: String,
    pub role: Role,
    pub ids: Vec<String>,
}

impl IdEvent {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.ids {
            h.update(id.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Thread-safe log of which ids every stage touched. Events are deduplicated
/// and reported in sorted order, so the log does not depend on scheduling.
#[derive(Debug, Default)]
pub struct IdAudit {
    events: Mutex<BTreeSet<IdEvent>>,
}

impl IdAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record<S: AsRef<str>>(&self, stage: impl Into<String>, role: Role, ids: &[S]) {
        let mut ids: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
        ids.sort_unstable();
        let event = IdEvent {
            stage: stage.into(),
            role,
            ids,
        };
        self.events.lock().expect("audit lock").insert(event);
    }

    pub fn events(&self) -> Vec<IdEvent> {
        self.events.lock().expect("audit lock").iter().cloned().collect()
    }

    /// Fit and select events that contain any of `held_out`.
    pub fn leaks<S: AsRef<str>>(&self, held_out: &[S]) -> Vec<(String, Role, usize)> {
        let held: BTreeSet<&str> = held_out.iter().map(|s| s.as_ref()).collect();
        self.events()
            .into_iter()
            .filter(|e| e.role != Role::Evaluate)
            .filter_map(|e| {
                let n = e.ids.iter().filter(|id| held.contains(id.as_str())).count();
                (n > 0).then_some((e.stage, e.role, n))
            })
            .collect()
    }

    pub fn check_isolated<S: AsRef<str>>(&self, held_out: &[S]) -> Result<()> {
        match self.leaks(held_out).first() {
            None => Ok(()),
            Some((stage, role, n)) => Err(Error::State(format!(
                "{n} held-out ids reached stage `{stage}` ({})",
                role.as_str()
            ))),
        }
    }

    /// One line per (event, id): `stage,role,id`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["stage", "role", "id"])?;
        for e in self.events() {
            for id in &e.ids {
                out.write_record([e.stage.as_str(), e.role.as_str(), id.as_str()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
