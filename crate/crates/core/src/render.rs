//! Context rendering.
//!
//! Clause coordination follows the published item phrasings: related
//! attractor contexts always take a comma before the final "and" ("X, and
//! Y"), while unrelated attractor contexts drop it for two clauses ("X and
//! Y") and use a serial comma from three on.

use crate::condition::{AttractorKind, Condition, EntitySetting, PositionVariant};
use crate::frame::{join_list, Articles, SlotValue};
use crate::itembank::BaseTemplate;

/// Everything needed to render one context.
#[derive(Debug, Clone, Copy)]
pub struct RenderParts<'a> {
    pub template: &'a BaseTemplate,
    pub articles: &'a Articles,
    pub condition: Condition,
    pub key_entity: &'a str,
    pub background: &'a str,
    /// Attractor words (related kinds) or phrases (unrelated), in order.
    pub attractor_words: &'a [String],
    /// One entity per attractor in the multi setting; empty otherwise.
    pub attractor_entities: &'a [String],
    pub fillers: &'a [String],
}

fn join_clauses(clauses: &[String], related: bool) -> String {
    match clauses {
        [a, b] if related => format!("{a}, and {b}"),
        _ => join_list(clauses),
    }
}

impl RenderParts<'_> {
    fn fact_vp(&self) -> String {
        let background = self.background;
        self.template.fact.render(self.articles, &|slot| match slot {
            "background" => Some(SlotValue::One(background)),
            _ => None,
        })
    }

    /// Filler phrases followed by the critical fact, coordinated.
    fn key_vp(&self) -> String {
        let mut vps: Vec<String> = self.fillers.to_vec();
        vps.push(self.fact_vp());
        join_list(&vps)
    }

    fn key_clause(&self) -> String {
        format!("{} {}", self.key_entity, self.key_vp())
    }

    /// Attractors attached to the key entity as one verb phrase (related) or
    /// as a list of verb phrases (unrelated).
    fn single_vps(&self) -> Vec<String> {
        match self.template.single.get(self.condition.attractor_kind) {
            Some(frame) => {
                let words = self.attractor_words;
                vec![frame.render(self.articles, &|slot| match slot {
                    "words" => Some(SlotValue::List(words)),
                    _ => None,
                })]
            }
            None => self.attractor_words.to_vec(),
        }
    }

    /// One clause per attractor, each bound to its own entity.
    fn multi_clauses(&self) -> Vec<String> {
        debug_assert_eq!(self.attractor_words.len(), self.attractor_entities.len());
        let frame = self.template.multi.get(self.condition.attractor_kind);
        self.attractor_words
            .iter()
            .zip(self.attractor_entities)
            .map(|(word, entity)| match frame {
                Some(frame) => frame.render(self.articles, &|slot| match slot {
                    "entity" => Some(SlotValue::One(entity)),
                    "word" => Some(SlotValue::One(word)),
                    _ => None,
                }),
                None => format!("{entity} {word}"),
            })
            .collect()
    }

    fn first_sentence(&self) -> String {
        let c = self.condition;
        if c.n_attractors == 0 || self.attractor_words.is_empty() {
            return self.key_clause();
        }
        let related = c.attractor_kind != AttractorKind::Unrelated;
        match (c.position_variant, c.entity_setting) {
            (PositionVariant::AfterFact, EntitySetting::Single) => {
                let mut clauses = vec![self.key_clause()];
                clauses.extend(self.single_vps());
                join_clauses(&clauses, related)
            }
            (PositionVariant::AfterFact, EntitySetting::Multi) => {
                let mut clauses = vec![self.key_clause()];
                clauses.extend(self.multi_clauses());
                join_clauses(&clauses, related)
            }
            (PositionVariant::LateEntity, _) => {
                let mut clauses = self.multi_clauses();
                clauses.push(self.key_clause());
                join_clauses(&clauses, related)
            }
            (PositionVariant::Between, setting) => {
                let (frame, attractors) = match setting {
                    EntitySetting::Single => {
                        (&self.template.between_single, join_list(&self.single_vps()))
                    }
                    EntitySetting::Multi => {
                        (&self.template.between_multi, self.multi_clauses().join(" and "))
                    }
                };
                let fact = self.key_vp();
                let entity = self.key_entity;
                frame.render(self.articles, &|slot| match slot {
                    "entity" => Some(SlotValue::One(entity)),
                    "attractors" => Some(SlotValue::One(&attractors)),
                    "fact" => Some(SlotValue::One(&fact)),
                    _ => None,
                })
            }
        }
    }
}

/// Renders the full two-sentence cloze context, ending in the blank marker.
pub fn render_context(parts: &RenderParts<'_>) -> String {
    let entity = parts.key_entity;
    let query = parts.template.query.render(parts.articles, &|slot| match slot {
        "entity" => Some(SlotValue::One(entity)),
        _ => None,
    });
    format!("{}. {}", parts.first_sentence(), query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itembank::ItemBank;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fillers_precede_the_fact() {
        let bank = ItemBank::bundled();
        let fillers = strings(&["sang in a choir", "has a sister"]);
        let parts = RenderParts {
            template: bank.template("countries").unwrap(),
            articles: &bank.articles,
            condition: Condition { n_fillers: 2, ..Condition::base() },
            key_entity: "Sebastian",
            background: "France",
            attractor_words: &[],
            attractor_entities: &[],
            fillers: &fillers,
        };
        assert_eq!(
            render_context(&parts),
            "Sebastian sang in a choir, has a sister, and lives in France. The capital of Sebastian's country is ___"
        );
    }

    #[test]
    fn between_with_filler_keeps_fact_last() {
        let bank = ItemBank::bundled();
        let fillers = strings(&["has a sister"]);
        let words = strings(&["Beijing"]);
        let entities = strings(&["Jack"]);
        let parts = RenderParts {
            template: bank.template("countries").unwrap(),
            articles: &bank.articles,
            condition: Condition {
                attractor_kind: AttractorKind::TType,
                n_attractors: 1,
                entity_setting: EntitySetting::Multi,
                position_variant: PositionVariant::Between,
                n_fillers: 1,
            },
            key_entity: "Daniel",
            background: "Chile",
            attractor_words: &words,
            attractor_entities: &entities,
            fillers: &fillers,
        };
        assert_eq!(
            render_context(&parts),
            "Daniel knows that Jack lives in Beijing and he himself has a sister and lives in Chile. The capital of Daniel's country is ___"
        );
    }
}
