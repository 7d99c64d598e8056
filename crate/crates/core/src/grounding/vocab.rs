use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::gridworld::{Color, Task};
use crate::hole::Hole;
use crate::logic::{
    enumerate_clauses, ClauseLibrary, GroundAtom, HerbrandBase, LibraryConfig, LogicError,
    PredicateKind, Signature,
};

/// Type guard printed for each constant. HOW's `x` and `y` have none.
pub const GUARDS: [(&str, &str); 10] = [
    ("agent", "is_agent"),
    ("env", "is_env"),
    ("door", "is_door"),
    ("box", "is_box"),
    ("key", "is_key"),
    ("empty", "is_empty"),
    ("goal", "is_goal"),
    ("door_red", "is_red"),
    ("door_yellow", "is_yellow"),
    ("door_blue", "is_blue"),
];

pub fn door_constant(c: Color) -> String {
    format!("door_{}", c.name())
}

/// Extensional atoms, heads and printing signature of one hole.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleVocabulary {
    pub hole: Hole,
    /// Extensional atoms followed by the intensional heads, in base order.
    pub base: HerbrandBase,
    pub heads: Vec<GroundAtom>,
    pub signature: Signature,
}

impl HoleVocabulary {
    fn new(hole: Hole, ext: Vec<GroundAtom>, heads: Vec<&str>) -> Self {
        let heads: Vec<GroundAtom> = heads.into_iter().map(GroundAtom::nullary).collect();
        let base = HerbrandBase::from_atoms(
            ext.into_iter()
                .map(|a| (a, PredicateKind::Extensional))
                .chain(heads.iter().cloned().map(|h| (h, PredicateKind::Intensional))),
        )
        .expect("built-in vocabulary is well formed");
        let mut heads = heads;
        heads.sort();
        let signature = Signature::from_base(
            &base,
            GUARDS.iter().copied().filter(|(c, _)| {
                base.atoms().iter().any(|a| a.terms.iter().any(|t| t == c))
            }),
        );
        HoleVocabulary {
            hole,
            base,
            heads,
            signature,
        }
    }

    pub fn extensional(&self) -> impl Iterator<Item = &GroundAtom> + '_ {
        self.base.extensional_indices().map(|i| self.base.atom(i))
    }

    pub fn library(&self, config: LibraryConfig) -> Result<ClauseLibrary, LogicError> {
        enumerate_clauses(&self.base, &self.heads, config)
    }
}

/// The three hole vocabularies of a task. Sem-mod variants share the
/// vocabulary of their base task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVocabulary {
    pub task: Task,
    pub where_: HoleVocabulary,
    pub how: HoleVocabulary,
    pub what: HoleVocabulary,
}

fn u(p: &str, c: &str) -> GroundAtom {
    GroundAtom::unary(p, c)
}

impl TaskVocabulary {
    pub fn for_task(task: Task) -> Self {
        let base = task.base();
        let (where_atoms, where_heads, classes): (Vec<GroundAtom>, Vec<&str>, Vec<String>) =
            match base {
                Task::DoorKey => (
                    vec![u("has_key", "agent"), u("has_key", "env"), u("is_open", "door")],
                    vec!["gt_key", "gt_door", "gt_goal"],
                    vec!["key".into(), "door".into()],
                ),
                Task::BoxKey => (
                    vec![u("has_key", "agent"), u("has_key", "env"), u("is_open", "door")],
                    vec!["gt_box", "gt_key", "gt_door", "gt_goal"],
                    vec!["box".into(), "key".into(), "door".into()],
                ),
                Task::UnlockPickup => (
                    vec![u("has_key", "agent"), u("is_open", "door")],
                    vec!["gt_key", "gt_door", "drop_key", "gt_box"],
                    vec!["key".into(), "door".into(), "empty".into(), "box".into()],
                ),
                Task::MultiRoom => {
                    let mut atoms = vec![u("reachable", "goal")];
                    for c in Color::ALL {
                        atoms.push(u("reachable", &door_constant(c)));
                        atoms.push(u("is_open", &door_constant(c)));
                    }
                    (
                        atoms,
                        vec!["gt_red", "gt_yellow", "gt_blue", "gt_goal"],
                        Color::ALL.iter().map(|c| door_constant(*c)).collect(),
                    )
                }
                _ => unreachable!("base task"),
            };
        let mut what_atoms = where_atoms.clone();
        what_atoms.extend(classes.iter().map(|c| u("at", c)));
        let how_atoms = ["pos", "neg", "zero"]
            .iter()
            .flat_map(|p| [u(p, "x"), u(p, "y")])
            .collect();
        TaskVocabulary {
            task: base,
            where_: HoleVocabulary::new(Hole::Where, where_atoms, where_heads),
            how: HoleVocabulary::new(
                Hole::How,
                how_atoms,
                vec!["go_north", "go_south", "go_east", "go_west"],
            ),
            what: HoleVocabulary::new(Hole::What, what_atoms, vec!["pick", "toggle", "drop", "noop"]),
        }
    }

    pub fn hole(&self, hole: Hole) -> &HoleVocabulary {
        match hole {
            Hole::Where => &self.where_,
            Hole::How => &self.how,
            Hole::What => &self.what,
        }
    }

    /// Hole whose heads include `head`.
    pub fn hole_of_head(&self, head: &GroundAtom) -> Option<Hole> {
        Hole::ALL.into_iter().find(|h| self.hole(*h).heads.contains(head))
    }

    /// Signature covering every hole, for whole-program parsing.
    pub fn signature(&self) -> Signature {
        let mut s = self.where_.signature.clone();
        s.merge(&self.how.signature);
        s.merge(&self.what.signature);
        s
    }

    pub fn libraries(
        &self,
        config: LibraryConfig,
    ) -> Result<std::collections::BTreeMap<Hole, ClauseLibrary>, LogicError> {
        Hole::ALL
            .into_iter()
            .map(|h| Ok((h, self.hole(h).library(config)?)))
            .collect()
    }

    /// Plain-text listing of atoms and heads per hole.
    pub fn manifest(&self) -> String {
        let mut out = format!("task {}\n", self.task.name());
        for h in Hole::ALL {
            let v = self.hole(h);
            let _ = writeln!(out, "[{h}]");
            let consts: std::collections::BTreeSet<&str> = v
                .base
                .atoms()
                .iter()
                .flat_map(|a| a.terms.iter().map(String::as_str))
                .collect();
            let _ = writeln!(out, "constants {}", consts.into_iter().collect::<Vec<_>>().join(" "));
            for a in v.extensional() {
                let _ = writeln!(out, "fact {a}");
            }
            for a in &v.heads {
                let _ = writeln!(out, "head {a}");
            }
        }
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.manifest().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doorkey_sizes() {
        let v = TaskVocabulary::for_task(Task::DoorKey);
        assert_eq!(v.where_.base.len(), 6);
        assert_eq!(v.how.base.len(), 10);
        assert_eq!(v.what.base.len(), 5 + 4);
        let lib = v.where_.library(LibraryConfig::default()).unwrap();
        // 3 singletons x 2 polarities + 3 pairs x 4 masks
        assert_eq!(lib.heads()[0].len(), 18);
    }

    #[test]
    fn sem_mod_shares_vocabulary() {
        assert_eq!(
            TaskVocabulary::for_task(Task::BoxKeySemMod).hash(),
            TaskVocabulary::for_task(Task::BoxKey).hash()
        );
        assert_ne!(
            TaskVocabulary::for_task(Task::DoorKey).hash(),
            TaskVocabulary::for_task(Task::BoxKey).hash()
        );
    }

    #[test]
    fn heads_partition_holes() {
        for t in Task::ALL {
            let v = TaskVocabulary::for_task(t);
            for h in Hole::ALL {
                for head in &v.hole(h).heads {
                    assert_eq!(v.hole_of_head(head), Some(h));
                }
            }
        }
    }
}
