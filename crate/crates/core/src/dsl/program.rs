use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diff::ParamStore;
use crate::gridworld::Task;
use crate::grounding::TaskVocabulary;
use crate::hole::Hole;
use crate::logic::syntax::ParseErrorKind;
use crate::logic::{Clause, ClauseLibrary, GroundAtom, HerbrandBase, LibraryConfig, Signature};

use super::{ProgramError, SelectorError};

pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub source: Option<String>,
    pub threshold: Option<f64>,
    pub timestamp: Option<String>,
}

/// Clause sets per hole. Clauses are kept sorted, so printing is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedProgram {
    pub task: Task,
    /// Library depth the clauses were drawn from; depth > 1 programs may
    /// mention auxiliary heads.
    pub depth: usize,
    pub provenance: Provenance,
    clauses: BTreeMap<Hole, Vec<Clause>>,
}

/// Base of `hole` including auxiliary heads for `depth`.
pub fn hole_base(vocab: &TaskVocabulary, hole: Hole, depth: usize) -> HerbrandBase {
    let v = vocab.hole(hole);
    if depth <= 1 {
        return v.base.clone();
    }
    v.library(LibraryConfig { depth, max_body: 2 })
        .map(|l| l.base().clone())
        .unwrap_or_else(|_| v.base.clone())
}

fn signature(vocab: &TaskVocabulary, depth: usize) -> Signature {
    let mut sig = vocab.signature();
    if depth > 1 {
        for h in Hole::ALL {
            sig.merge(&Signature::from_base(&hole_base(vocab, h, depth), std::iter::empty()));
        }
    }
    sig
}

fn hole_of(vocab: &TaskVocabulary, head: &GroundAtom, depth: usize) -> Option<Hole> {
    vocab.hole_of_head(head).or_else(|| {
        Hole::ALL
            .into_iter()
            .find(|h| depth > 1 && hole_base(vocab, *h, depth).index_of(head).is_some())
    })
}

impl ExtractedProgram {
    pub fn new(task: Task, depth: usize, provenance: Provenance, clauses: Vec<(Hole, Clause)>) -> Self {
        let mut map: BTreeMap<Hole, Vec<Clause>> = Hole::ALL.iter().map(|h| (*h, Vec::new())).collect();
        for (h, c) in clauses {
            map.get_mut(&h).unwrap().push(c);
        }
        for cs in map.values_mut() {
            cs.sort();
            cs.dedup();
        }
        ExtractedProgram {
            task: task.base(),
            depth: depth.max(1),
            provenance,
            clauses: map,
        }
    }

    pub fn clauses(&self, hole: Hole) -> &[Clause] {
        &self.clauses[&hole]
    }

    pub fn all_clauses(&self) -> impl Iterator<Item = (Hole, &Clause)> + '_ {
        self.clauses.iter().flat_map(|(h, cs)| cs.iter().map(move |c| (*h, c)))
    }

    pub fn len(&self) -> usize {
        self.clauses.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks every clause against `vocab`, so a program written for one
    /// task can run on another task that shares its atoms.
    pub fn check_against(&self, vocab: &TaskVocabulary) -> Result<(), ProgramError> {
        for (h, c) in self.all_clauses() {
            let base = hole_base(vocab, h, self.depth);
            c.validate(&base)
                .map_err(|e| ProgramError::Vocabulary(format!("{} hole: {e}", h)))?;
            if hole_of(vocab, &c.head, self.depth) != Some(h) {
                return Err(ProgramError::Vocabulary(format!(
                    "head {} does not belong to the {h} hole of {}",
                    c.head,
                    vocab.task
                )));
            }
        }
        Ok(())
    }

    /// `.lhp` text: a provenance header followed by one clause per line,
    /// grouped by hole.
    pub fn print(&self) -> String {
        let vocab = TaskVocabulary::for_task(self.task);
        let sig = signature(&vocab, self.depth);
        let mut out = String::new();
        let _ = writeln!(out, "# task: {}", self.task.name());
        if self.depth != 1 {
            let _ = writeln!(out, "# depth: {}", self.depth);
        }
        if let Some(s) = &self.provenance.source {
            let _ = writeln!(out, "# source: {s}");
        }
        if let Some(t) = self.provenance.threshold {
            let _ = writeln!(out, "# threshold: {t}");
        }
        if let Some(t) = &self.provenance.timestamp {
            let _ = writeln!(out, "# extracted: {t}");
        }
        for (h, cs) in &self.clauses {
            let _ = writeln!(out, "\n# [{h}]");
            for c in cs {
                let _ = writeln!(out, "{}", sig.print_clause(c));
            }
        }
        out
    }

    /// Parses `.lhp` text. The task comes from the `# task:` header, or from
    /// `default_task` when the header is absent.
    pub fn parse(text: &str, default_task: Option<Task>) -> Result<Self, ProgramError> {
        let mut task = None;
        let mut depth = 1;
        let mut prov = Provenance::default();
        for (i, line) in text.lines().enumerate() {
            let Some(rest) = line.trim().strip_prefix('#') else { continue };
            let Some((key, value)) = rest.split_once(':') else { continue };
            let value = value.trim().to_string();
            let bad = |what: &str| ProgramError::Header(format!("line {}: bad {what} `{value}`", i + 1));
            match key.trim() {
                "task" => task = Some(value.parse::<Task>().map_err(|_| bad("task"))?),
                "depth" => depth = value.parse::<usize>().map_err(|_| bad("depth"))?,
                "source" => prov.source = Some(value),
                "threshold" => prov.threshold = Some(value.parse::<f64>().map_err(|_| bad("threshold"))?),
                "extracted" => prov.timestamp = Some(value),
                _ => {}
            }
        }
        let task = task
            .or(default_task)
            .ok_or_else(|| ProgramError::Header("no `# task:` header and no task given".into()))?;
        let vocab = TaskVocabulary::for_task(task);
        let clauses = signature(&vocab, depth).parse_clauses(text).map_err(|e| match e.kind {
            ParseErrorKind::Syntax => ProgramError::Syntax(e),
            ParseErrorKind::Vocabulary => ProgramError::Vocabulary(e.to_string()),
        })?;
        let mut tagged = Vec::with_capacity(clauses.len());
        for c in clauses {
            let h = hole_of(&vocab, &c.head, depth).ok_or_else(|| {
                ProgramError::Vocabulary(format!("head {} is not a hole head of {task}", c.head))
            })?;
            tagged.push((h, c));
        }
        let p = ExtractedProgram::new(task, depth, prov, tagged);
        p.check_against(&vocab)?;
        Ok(p)
    }
}

/// Clauses whose softmax weight reaches `threshold`, plus the argmax clause
/// of every head. Ties for the argmax keep the first candidate.
pub fn extract(
    task: Task,
    params: &ParamStore,
    libraries: &BTreeMap<Hole, ClauseLibrary>,
    threshold: f64,
    provenance: Provenance,
) -> ExtractedProgram {
    let mut out = Vec::new();
    let mut depth = 1;
    for (hole, lib) in libraries {
        depth = depth.max(lib.config().depth);
        let Some(hp) = params.hole(*hole) else { continue };
        for (pos, _) in lib.heads().iter().enumerate() {
            let w = hp.softmax(pos);
            let best = w
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > w[b] { i } else { b });
            for (c, v) in w.iter().enumerate() {
                if c == best || *v >= threshold {
                    out.push((*hole, lib.clause(pos, c)));
                }
            }
        }
    }
    ExtractedProgram::new(task, depth, Provenance { threshold: Some(threshold), ..provenance }, out)
}

/// Which clauses an edit removes: every clause of a head (`gt_goal`,
/// optionally `where:gt_goal`), or one clause given in full clause syntax.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Head { hole: Option<Hole>, head: String },
    Clause(String),
}

impl std::str::FromStr for Selector {
    type Err = SelectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(SelectorError::Empty);
        }
        if s.contains(":-") {
            return Ok(Selector::Clause(s.to_string()));
        }
        let (hole, head) = match s.split_once(':') {
            Some((h, rest)) => (
                Some(h.parse::<Hole>().map_err(SelectorError::Invalid)?),
                rest.trim(),
            ),
            None => (None, s),
        };
        let head = head.trim_end_matches("()").to_string();
        Ok(Selector::Head { hole, head })
    }
}

impl Selector {
    /// Whether the selector picks `clause` in `hole`. Clause selectors are
    /// parsed with the program's own vocabulary.
    pub fn matches(&self, hole: Hole, clause: &Clause, sig: &Signature) -> Result<bool, SelectorError> {
        match self {
            Selector::Head { hole: want, head } => Ok(want.is_none_or(|w| w == hole)
                && clause.head.predicate == *head),
            Selector::Clause(text) => {
                let c = sig
                    .parse_clause(text)
                    .map_err(|e| SelectorError::Invalid(e.to_string()))?;
                Ok(c == *clause)
            }
        }
    }

    pub fn head_name(&self) -> Option<&str> {
        match self {
            Selector::Head { head, .. } => Some(head),
            Selector::Clause(_) => None,
        }
    }
}

/// Returns `program` without the clauses chosen by `selector`.
pub fn edit_program(program: &ExtractedProgram, selector: &Selector) -> Result<ExtractedProgram, SelectorError> {
    let vocab = TaskVocabulary::for_task(program.task);
    let sig = signature(&vocab, program.depth);
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (h, c) in program.all_clauses() {
        if selector.matches(h, c, &sig)? {
            removed.push(c.head.clone());
        } else {
            kept.push((h, c.clone()));
        }
    }
    if removed.is_empty() {
        return Err(SelectorError::NoMatch(format!("{selector:?}")));
    }
    for head in removed {
        if !kept.iter().any(|(_, c)| c.head == head) {
            log::warn!("no clause left for {head}; it can no longer be derived");
        }
    }
    Ok(ExtractedProgram::new(
        program.task,
        program.depth,
        program.provenance.clone(),
        kept,
    ))
}

const ORACLE_DOORKEY: &str = include_str!("../../programs/doorkey.lhp");
const ORACLE_BOXKEY: &str = include_str!("../../programs/boxkey.lhp");
const ORACLE_UNLOCKPICKUP: &str = include_str!("../../programs/unlockpickup.lhp");
const ORACLE_MULTIROOM: &str = include_str!("../../programs/multiroom.lhp");

/// Hand-written reference program for a task (sem-mod variants use their
/// base task's program).
pub fn oracle_program(task: Task) -> ExtractedProgram {
    let text = match task.base() {
        Task::DoorKey => ORACLE_DOORKEY,
        Task::BoxKey => ORACLE_BOXKEY,
        Task::UnlockPickup => ORACLE_UNLOCKPICKUP,
        Task::MultiRoom => ORACLE_MULTIROOM,
        _ => unreachable!("base task"),
    };
    ExtractedProgram::parse(text, None).expect("bundled program parses")
}

pub fn oracle_text(task: Task) -> &'static str {
    match task.base() {
        Task::DoorKey => ORACLE_DOORKEY,
        Task::BoxKey => ORACLE_BOXKEY,
        Task::UnlockPickup => ORACLE_UNLOCKPICKUP,
        Task::MultiRoom => ORACLE_MULTIROOM,
        _ => unreachable!("base task"),
    }
}
