//! Builds the language profile, vocabulary, tokenizer and provider a run uses.

use synmark_core::model::{toy_decode_table, LogitProvider, ToyConfig, ToyModelSpec, ToyProvider};
use synmark_core::remote::{RemoteConfig, RemoteProvider};
use synmark_core::syntax::{build_vocabulary_profile, LanguageProfile, VocabularyProfile};
use synmark_core::tokenizer::{load_decode_table, GreedyTokenizer};

use crate::settings::Settings;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Toy,
    Remote(String),
}

impl ProviderSpec {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        if s == "toy" {
            return Ok(ProviderSpec::Toy);
        }
        match s.strip_prefix("remote:") {
            Some(url) if !url.is_empty() => Ok(ProviderSpec::Remote(url.to_string())),
            _ => Err(HarnessError::Validation(format!(
                "unknown provider \"{s}\" (expected toy or remote:<url>)"
            ))),
        }
    }
}

pub struct Environment {
    pub language: LanguageProfile,
    pub profile: VocabularyProfile,
    pub tokenizer: GreedyTokenizer,
    pub provider: Box<dyn LogitProvider>,
}

impl Environment {
    pub fn build(settings: &Settings, language: &str) -> Result<Self, HarnessError> {
        let lang = LanguageProfile::resolve(language)
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        let spec = ProviderSpec::parse(&settings.provider)?;
        let table = match (&spec, &settings.vocab) {
            (_, Some(path)) => {
                load_decode_table(path).map_err(|e| HarnessError::Validation(e.to_string()))?
            }
            (ProviderSpec::Toy, None) => toy_decode_table(&lang, settings.toy_identifiers),
            (ProviderSpec::Remote(_), None) => {
                return Err(HarnessError::Validation(
                    "a remote provider needs --vocab <decode table>".into(),
                ))
            }
        };
        let profile = build_vocabulary_profile(&lang, table.clone())
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        let provider: Box<dyn LogitProvider> = match spec {
            ProviderSpec::Toy => {
                let model = ToyModelSpec::random(&profile, ToyConfig::default(), settings.toy_model_seed);
                Box::new(ToyProvider::new(model).map_err(HarnessError::Validation)?)
            }
            ProviderSpec::Remote(url) => {
                let config = RemoteConfig {
                    endpoint: url,
                    timeout_secs: settings.remote_timeout_secs,
                    retries: settings.remote_retries,
                };
                Box::new(
                    RemoteProvider::new(config, profile.vocab_size())
                        .map_err(|e| HarnessError::Runtime(e.to_string()))?,
                )
            }
        };
        Ok(Environment {
            language: lang,
            profile,
            tokenizer: GreedyTokenizer::new(table),
            provider,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provider_specs() {
        assert_eq!(ProviderSpec::parse("toy").unwrap(), ProviderSpec::Toy);
        assert_eq!(
            ProviderSpec::parse("remote:http://h:1/x").unwrap(),
            ProviderSpec::Remote("http://h:1/x".into())
        );
        assert!(ProviderSpec::parse("remote:").is_err());
        assert!(ProviderSpec::parse("gpt").is_err());
    }

    #[test]
    fn remote_without_vocab_is_rejected() {
        let s = Settings {
            provider: "remote:http://127.0.0.1:9".into(),
            ..Settings::default()
        };
        assert!(matches!(Environment::build(&s, "python"), Err(HarnessError::Validation(_))));
    }

    #[test]
    fn toy_environment() {
        let env = Environment::build(&Settings::default(), "java").unwrap();
        assert_eq!(env.provider.vocab_size(), env.profile.vocab_size());
        assert_eq!(env.profile.language(), "java");
    }
}
