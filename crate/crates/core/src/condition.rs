//! Experimental condition space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const MAX_ATTRACTORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    /// Same semantic class as the critical background word.
    BType,
    /// Same semantic class as the target word.
    TType,
    Unrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntitySetting {
    /// Attractors are further properties of the key entity.
    Single,
    /// Each attractor is bound to a different entity.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionVariant {
    /// Attractors follow the critical fact.
    AfterFact,
    /// Attractors sit between the key entity and the critical fact.
    Between,
    /// The key entity's clause comes last, after the attractor clauses.
    LateEntity,
}

macro_rules! string_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!("unknown {} {other:?}", stringify!($ty))),
                }
            }
        }
    };
}

string_enum!(AttractorKind {
    AttractorKind::BType => "b_type",
    AttractorKind::TType => "t_type",
    AttractorKind::Unrelated => "unrelated",
});

string_enum!(EntitySetting {
    EntitySetting::Single => "single",
    EntitySetting::Multi => "multi",
});

string_enum!(PositionVariant {
    PositionVariant::AfterFact => "after_fact",
    PositionVariant::Between => "between",
    PositionVariant::LateEntity => "late_entity",
});

impl AttractorKind {
    pub const ALL: [AttractorKind; 3] = [AttractorKind::BType, AttractorKind::TType, AttractorKind::Unrelated];

    pub fn is_related(self) -> bool {
        !matches!(self, AttractorKind::Unrelated)
    }

    pub(crate) fn code(self) -> u64 {
        self as u64
    }
}

impl EntitySetting {
    pub(crate) fn code(self) -> u64 {
        self as u64
    }
}

impl PositionVariant {
    pub(crate) fn code(self) -> u64 {
        self as u64
    }
}

/// One cell of the condition space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub attractor_kind: AttractorKind,
    pub n_attractors: usize,
    pub entity_setting: EntitySetting,
    pub position_variant: PositionVariant,
    pub n_fillers: usize,
}

impl Condition {
    pub fn base() -> Self {
        Condition {
            attractor_kind: AttractorKind::BType,
            n_attractors: 0,
            entity_setting: EntitySetting::Single,
            position_variant: PositionVariant::AfterFact,
            n_fillers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_attractors > MAX_ATTRACTORS {
            return Err(format!(
                "{self}: n_attractors must be in 0..={MAX_ATTRACTORS}"
            ));
        }
        if self.position_variant == PositionVariant::LateEntity {
            if self.entity_setting != EntitySetting::Multi {
                return Err(format!("{self}: late_entity requires the multi entity setting"));
            }
            if self.n_attractors == 0 {
                return Err(format!("{self}: late_entity requires at least one attractor"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/n{}/f{}",
            self.attractor_kind, self.entity_setting, self.position_variant, self.n_attractors, self.n_fillers
        )
    }
}
