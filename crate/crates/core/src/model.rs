//! Session, turn and user types plus ingestion of the newline-delimited
//! JSON turn log.
//!
//! One record per turn; records are grouped by `session_id` and ordered by
//! `turn_index`. Parsing is order-insensitive across lines.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("session {session_id}: {message}")]
    Validation { session_id: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolChoice {
    None,
    Search,
    Code,
    Email,
}

impl ToolChoice {
    pub const ALL: [ToolChoice; 4] = [
        ToolChoice::None,
        ToolChoice::Search,
        ToolChoice::Code,
        ToolChoice::Email,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn is_invoked(self) -> bool {
        self != ToolChoice::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToolChoice::None => "none",
            ToolChoice::Search => "search",
            ToolChoice::Code => "code",
            ToolChoice::Email => "email",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleChoice {
    Concise,
    Detailed,
}

impl StyleChoice {
    pub const ALL: [StyleChoice; 2] = [StyleChoice::Concise, StyleChoice::Detailed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StyleChoice::Concise => "concise",
            StyleChoice::Detailed => "detailed",
        }
    }
}

/// Joint action over the two decision heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionPair {
    pub tool: ToolChoice,
    pub style: StyleChoice,
}

impl ActionPair {
    pub const N_JOINT: usize = 8;

    pub fn new(tool: ToolChoice, style: StyleChoice) -> Self {
        Self { tool, style }
    }

    /// Index into the 4x2 joint action grid (tool-major).
    pub fn joint_index(self) -> usize {
        self.tool.index() * 2 + self.style.index()
    }

    pub fn from_joint_index(i: usize) -> Self {
        Self::new(ToolChoice::from_index(i / 2), StyleChoice::from_index(i % 2))
    }

    pub fn all() -> impl Iterator<Item = ActionPair> {
        (0..Self::N_JOINT).map(Self::from_joint_index)
    }
}

impl fmt::Display for ActionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.tool.as_str(), self.style.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolOutcome {
    NotInvoked,
    Success,
    Failure,
}

impl ToolOutcome {
    /// Numeric encoding used in feature vectors.
    pub fn signed(self) -> f64 {
        match self {
            ToolOutcome::NotInvoked => 0.0,
            ToolOutcome::Success => 1.0,
            ToolOutcome::Failure => -1.0,
        }
    }

    pub fn consistent_with(self, tool: ToolChoice) -> bool {
        (self == ToolOutcome::NotInvoked) == (tool == ToolChoice::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub fn indicator(self) -> f64 {
        match self {
            Level::Low => 0.0,
            Level::High => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::High => "high",
        }
    }
}

/// Latent 2x2 user type: health literacy x self-efficacy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Archetype {
    pub literacy: Level,
    pub efficacy: Level,
}

impl Archetype {
    /// Canonical order shared with [`crate::rewards::ArchetypePosterior`]:
    /// LH x EH, LH x EL, LL x EL, LL x EH.
    pub const ALL: [Archetype; 4] = [
        Archetype::new(Level::High, Level::High),
        Archetype::new(Level::High, Level::Low),
        Archetype::new(Level::Low, Level::Low),
        Archetype::new(Level::Low, Level::High),
    ];

    pub const fn new(literacy: Level, efficacy: Level) -> Self {
        Self { literacy, efficacy }
    }

    pub fn index(self) -> usize {
        match (self.literacy, self.efficacy) {
            (Level::High, Level::High) => 0,
            (Level::High, Level::Low) => 1,
            (Level::Low, Level::Low) => 2,
            (Level::Low, Level::High) => 3,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn label(self) -> &'static str {
        match self.index() {
            0 => "L_high x E_high",
            1 => "L_high x E_low",
            2 => "L_low x E_low",
            _ => "L_low x E_high",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub literacy: Level,
    pub efficacy: Level,
}

impl UserProfile {
    pub fn archetype(&self) -> Archetype {
        Archetype::new(self.literacy, self.efficacy)
    }
}

/// Observable per-turn signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnFeatures {
    pub turn_index: u32,
    pub latency_seconds: f64,
    pub response_chars: u32,
    pub has_citation: bool,
    pub has_structure: bool,
    pub user_asked_explain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedTurn {
    pub session_id: String,
    pub features: TurnFeatures,
    pub action: ActionPair,
    pub outcome: ToolOutcome,
    pub rating: Option<u8>,
}

impl LoggedTurn {
    /// Missingness indicator `m_t`.
    pub fn rated(&self) -> bool {
        self.rating.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub user: UserProfile,
    pub turns: Vec<LoggedTurn>,
}

impl Session {
    pub fn archetype(&self) -> Archetype {
        self.user.archetype()
    }

    /// Checks the structural invariants: nonempty, shared id, contiguous
    /// turn indices starting at 1, ratings in range, outcome/tool agreement.
    pub fn validate(&self) -> Result<(), LogError> {
        let fail = |message: String| LogError::Validation {
            session_id: self.session_id.clone(),
            message,
        };
        if self.turns.is_empty() {
            return Err(fail("session has no turns".into()));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.session_id != self.session_id {
                return Err(fail(format!("turn carries session_id {}", turn.session_id)));
            }
            if let Some(r) = turn.rating {
                if !(1..=5).contains(&r) {
                    return Err(fail(format!("rating out of range: {r}")));
                }
            }
            if !turn.outcome.consistent_with(turn.action.tool) {
                return Err(fail(format!(
                    "turn {}: tool_outcome {:?} inconsistent with tool {}",
                    turn.features.turn_index,
                    turn.outcome,
                    turn.action.tool.as_str()
                )));
            }
            if !turn.features.latency_seconds.is_finite() || turn.features.latency_seconds < 0.0 {
                return Err(fail(format!(
                    "turn {}: latency must be a nonnegative number",
                    turn.features.turn_index
                )));
            }
            let expected = i as u32 + 1;
            if turn.features.turn_index != expected {
                return Err(fail(format!(
                    "turn_index not contiguous: expected {expected}, found {}",
                    turn.features.turn_index
                )));
            }
        }
        Ok(())
    }
}

/// Wire form of one log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub session_id: String,
    pub user_id: String,
    pub literacy: Level,
    pub efficacy: Level,
    pub turn_index: u32,
    pub latency_seconds: f64,
    pub response_chars: u32,
    pub has_citation: bool,
    pub has_structure: bool,
    pub user_asked_explain: bool,
    pub tool: ToolChoice,
    pub style: StyleChoice,
    pub tool_outcome: ToolOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<i64>,
}

impl LogRecord {
    pub fn from_turn(user: &UserProfile, turn: &LoggedTurn) -> Self {
        Self {
            session_id: turn.session_id.clone(),
            user_id: user.user_id.clone(),
            literacy: user.literacy,
            efficacy: user.efficacy,
            turn_index: turn.features.turn_index,
            latency_seconds: turn.features.latency_seconds,
            response_chars: turn.features.response_chars,
            has_citation: turn.features.has_citation,
            has_structure: turn.features.has_structure,
            user_asked_explain: turn.features.user_asked_explain,
            tool: turn.action.tool,
            style: turn.action.style,
            tool_outcome: turn.outcome,
            rating: turn.rating.map(i64::from),
        }
    }
}

/// Parses a newline-delimited JSON turn log into validated sessions sorted
/// by session id, each with turns sorted by `turn_index`.
pub fn parse_log<R: BufRead>(reader: R) -> Result<Vec<Session>, LogError> {
    let mut grouped: BTreeMap<String, (UserProfile, Vec<LoggedTurn>)> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let rating = match record.rating {
            None => None,
            Some(r) if (1..=5).contains(&r) => Some(r as u8),
            Some(r) => {
                return Err(LogError::Validation {
                    session_id: record.session_id,
                    message: format!("rating out of range: {r}"),
                })
            }
        };
        let user = UserProfile {
            user_id: record.user_id,
            literacy: record.literacy,
            efficacy: record.efficacy,
        };
        let turn = LoggedTurn {
            session_id: record.session_id.clone(),
            features: TurnFeatures {
                turn_index: record.turn_index,
                latency_seconds: record.latency_seconds,
                response_chars: record.response_chars,
                has_citation: record.has_citation,
                has_structure: record.has_structure,
                user_asked_explain: record.user_asked_explain,
            },
            action: ActionPair::new(record.tool, record.style),
            outcome: record.tool_outcome,
            rating,
        };
        match grouped.get_mut(&record.session_id) {
            Some((existing, turns)) => {
                if *existing != user {
                    return Err(LogError::Validation {
                        session_id: record.session_id,
                        message: "user fields differ between turns".into(),
                    });
                }
                turns.push(turn);
            }
            None => {
                grouped.insert(record.session_id, (user, vec![turn]));
            }
        }
    }

    let mut sessions = Vec::with_capacity(grouped.len());
    for (session_id, (user, mut turns)) in grouped {
        turns.sort_by_key(|t| t.features.turn_index);
        let session = Session {
            session_id,
            user,
            turns,
        };
        session.validate()?;
        sessions.push(session);
    }
    Ok(sessions)
}

pub fn parse_log_str(text: &str) -> Result<Vec<Session>, LogError> {
    parse_log(text.as_bytes())
}

/// Writes sessions back out in the log schema, one line per turn.
pub fn write_log<W: Write>(sessions: &[Session], mut out: W) -> Result<(), LogError> {
    for session in sessions {
        for turn in &session.turns {
            let record = LogRecord::from_turn(&session.user, turn);
            serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn log_to_string(sessions: &[Session]) -> String {
    let mut buf = Vec::new();
    write_log(sessions, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sessions: usize,
    pub users: usize,
    pub turns: usize,
    pub rated_turns: usize,
    pub rating_rate: f64,
    /// Turns whose index duplicates an earlier turn of the same session.
    pub turn_index_conflicts: usize,
    /// Turns whose index does not equal their 1-based position.
    pub turn_index_gaps: usize,
}

pub fn validate_sessions(sessions: &[Session]) -> ValidationReport {
    let mut turns = 0;
    let mut rated = 0;
    let mut conflicts = 0;
    let mut gaps = 0;
    let mut users = std::collections::BTreeSet::new();
    for session in sessions {
        users.insert(session.user.user_id.as_str());
        let mut seen = std::collections::BTreeSet::new();
        for (pos, turn) in session.turns.iter().enumerate() {
            turns += 1;
            if turn.rated() {
                rated += 1;
            }
            if !seen.insert(turn.features.turn_index) {
                conflicts += 1;
            }
            if turn.features.turn_index as usize != pos + 1 {
                gaps += 1;
            }
        }
    }
    ValidationReport {
        sessions: sessions.len(),
        users: users.len(),
        turns,
        rated_turns: rated,
        rating_rate: if turns == 0 {
            0.0
        } else {
            rated as f64 / turns as f64
        },
        turn_index_conflicts: conflicts,
        turn_index_gaps: gaps,
    }
}
