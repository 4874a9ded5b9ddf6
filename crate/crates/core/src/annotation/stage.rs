//! Lifecycle stages of an annotation project and their allowed transitions.

use std::collections::VecDeque;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AnnotationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Model,
    Procure,
    Annotate,
    TrainTest,
    Evaluate,
    Revise,
    Distribute,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Model,
        Stage::Procure,
        Stage::Annotate,
        Stage::TrainTest,
        Stage::Evaluate,
        Stage::Revise,
        Stage::Distribute,
    ];

    pub fn successors(self) -> &'static [Stage] {
        match self {
            Stage::Model => &[Stage::Procure],
            Stage::Procure => &[Stage::Annotate],
            Stage::Annotate => &[Stage::TrainTest],
            Stage::TrainTest => &[Stage::Evaluate],
            Stage::Evaluate => &[Stage::Revise, Stage::Distribute],
            Stage::Revise => &[Stage::Annotate],
            Stage::Distribute => &[],
        }
    }

    pub fn can_advance_to(self, to: Stage) -> bool {
        self.successors().contains(&to)
    }

    /// Position along the forward path; REVISE sits with EVALUATE.
    fn rank(self) -> u8 {
        match self {
            Stage::Model => 0,
            Stage::Procure => 1,
            Stage::Annotate => 2,
            Stage::TrainTest => 3,
            Stage::Evaluate | Stage::Revise => 4,
            Stage::Distribute => 5,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Model => "MODEL",
            Stage::Procure => "PROCURE",
            Stage::Annotate => "ANNOTATE",
            Stage::TrainTest => "TRAIN_TEST",
            Stage::Evaluate => "EVALUATE",
            Stage::Revise => "REVISE",
            Stage::Distribute => "DISTRIBUTE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStage {
    pub stage: Stage,
    pub entered_at: DateTime<Utc>,
    pub note: String,
}

/// Append-only stage history. Always starts in MODEL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageState {
    history: Vec<PipelineStage>,
}

impl StageState {
    pub fn new(now: DateTime<Utc>) -> Self {
        Self {
            history: vec![PipelineStage {
                stage: Stage::Model,
                entered_at: now,
                note: "project created".into(),
            }],
        }
    }

    pub fn current(&self) -> &PipelineStage {
        self.history.last().expect("history is never empty")
    }

    pub fn stage(&self) -> Stage {
        self.current().stage
    }

    pub fn history(&self) -> &[PipelineStage] {
        &self.history
    }

    /// Checks that the history starts in MODEL and follows allowed edges.
    pub fn is_valid_path(&self) -> bool {
        self.history.first().map(|s| s.stage) == Some(Stage::Model)
            && self
                .history
                .windows(2)
                .all(|w| w[0].stage.can_advance_to(w[1].stage))
    }

    pub fn advance_stage(
        &mut self,
        to: Stage,
        now: DateTime<Utc>,
        note: impl Into<String>,
    ) -> Result<&PipelineStage, AnnotationError> {
        let from = self.stage();
        if !from.can_advance_to(to) {
            return Err(AnnotationError::IllegalTransition { from, to });
        }
        self.history.push(PipelineStage {
            stage: to,
            entered_at: now,
            note: note.into(),
        });
        Ok(self.current())
    }

    /// Moves to `target` along the shortest allowed path. Being at the target
    /// already, or past it with no way back, is a no-op so reruns stay
    /// idempotent. Returns the stages entered.
    pub fn reach(
        &mut self,
        target: Stage,
        now: DateTime<Utc>,
        note: &str,
    ) -> Result<Vec<Stage>, AnnotationError> {
        let from = self.stage();
        if from == target {
            return Ok(Vec::new());
        }
        match shortest_path(from, target) {
            Some(path) => {
                for &s in &path {
                    self.advance_stage(s, now, note)?;
                }
                Ok(path)
            }
            None if target.rank() <= from.rank() => Ok(Vec::new()),
            None => Err(AnnotationError::IllegalTransition { from, to: target }),
        }
    }
}

fn shortest_path(from: Stage, to: Stage) -> Option<Vec<Stage>> {
    let mut prev: Vec<Option<Stage>> = vec![None; Stage::ALL.len()];
    let mut seen = [false; 7];
    seen[from as usize] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if s == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(p) = prev[cur as usize] {
                if p == from {
                    break;
                }
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for &n in s.successors() {
            if !seen[n as usize] {
                seen[n as usize] = true;
                prev[n as usize] = Some(s);
                queue.push_back(n);
            }
        }
    }
    None
}
