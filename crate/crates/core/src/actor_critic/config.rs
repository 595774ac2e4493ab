use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradients::Variant;

use super::{TrainConfig, DEFAULT_EVAL_EPISODES};

/// Frozen per-domain training hyperparameters shipped with the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDefaults {
    pub domain: String,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes: usize,
    pub eval_every: usize,
    pub max_len: usize,
    #[serde(default = "eval_episodes")]
    pub eval_episodes: usize,
}

fn eval_episodes() -> usize {
    DEFAULT_EVAL_EPISODES
}

const BUNDLED: [(&str, &str); 7] = [
    ("climb_game", include_str!("../../configs/climb_game.json")),
    ("morning_game", include_str!("../../configs/morning_game.json")),
    ("guess_game", include_str!("../../configs/guess_game.json")),
    ("dec_tiger", include_str!("../../configs/dec_tiger.json")),
    ("beverage", include_str!("../../configs/beverage.json")),
    ("oscillating_chain", include_str!("../../configs/oscillating_chain.json")),
    ("observable_climb", include_str!("../../configs/observable_climb.json")),
];

/// Bundled defaults for a canonical domain name.
pub fn default_config(domain: &str) -> Result<DomainDefaults> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(name, _)| *name == domain)
        .ok_or_else(|| Error::InvalidArgument(format!("no bundled config for domain '{domain}'")))?;
    Ok(serde_json::from_str(text)?)
}

impl DomainDefaults {
    pub fn to_train_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig {
            variant,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            episodes: self.episodes,
            seed,
            eval_every: self.eval_every,
            max_len: self.max_len,
            eval_episodes: self.eval_episodes,
            eval_budget: 200_000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DOMAIN_NAMES;

    #[test]
    fn every_domain_has_defaults() {
        for name in DOMAIN_NAMES {
            let d = default_config(name).unwrap();
            assert_eq!(d.domain, name);
            assert!(d.actor_lr > 0.0 && d.episodes > 0);
        }
    }
}
