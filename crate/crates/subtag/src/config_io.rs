//! Training configuration files: flat `key = value` text with one key per
//! [`TrainConfig`] field. Unknown keys are errors — no silent typos.

use std::fs;
use std::path::Path;

use subtag_core::model::UnitSet;
use subtag_core::train::TrainConfig;

use crate::error::FormatError;

pub fn parse_config(text: &str, path_label: &str) -> Result<TrainConfig, FormatError> {
    let mut cfg = TrainConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| FormatError::parse(path_label, i + 1, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        apply_key(&mut cfg, key, value)
            .map_err(|msg| FormatError::parse(path_label, i + 1, msg))?;
    }
    Ok(cfg)
}

pub fn apply_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
        value
            .parse::<T>()
            .map_err(|_| format!("bad value '{value}' for {key}"))
    }
    match key {
        "learning_rate" => cfg.learning_rate = num(key, value)?,
        "batch_size" => cfg.batch_size = num(key, value)?,
        "max_epochs" => cfg.max_epochs = num(key, value)?,
        "dropout_rate" => cfg.dropout_rate = num(key, value)?,
        "units" => cfg.units = UnitSet::parse(value).map_err(|e| e.to_string())?,
        "word_embeddings" => cfg.use_word_embeddings = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        "subword_embed_dim" => cfg.subword_embed_dim = num(key, value)?,
        "subword_hidden_dim" => cfg.subword_hidden_dim = num(key, value)?,
        "word_embed_dim" => cfg.word_embed_dim = num(key, value)?,
        "word_hidden_dim" => cfg.word_hidden_dim = num(key, value)?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<TrainConfig, FormatError> {
    let text = fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

pub fn config_to_string(cfg: &TrainConfig) -> String {
    format!(
        "learning_rate = {}\nbatch_size = {}\nmax_epochs = {}\ndropout_rate = {}\n\
         units = {}\nword_embeddings = {}\nseed = {}\n\
         subword_embed_dim = {}\nsubword_hidden_dim = {}\nword_embed_dim = {}\nword_hidden_dim = {}\n",
        cfg.learning_rate,
        cfg.batch_size,
        cfg.max_epochs,
        cfg.dropout_rate,
        cfg.units,
        cfg.use_word_embeddings,
        cfg.seed,
        cfg.subword_embed_dim,
        cfg.subword_hidden_dim,
        cfg.word_embed_dim,
        cfg.word_hidden_dim,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_apply_when_keys_are_missing() {
        let cfg = parse_config("seed = 9\n", "c").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.learning_rate, 0.0007);
        assert_eq!(cfg.max_epochs, 40);
        assert_eq!(cfg.dropout_rate, 0.5);
        assert_eq!(cfg.subword_hidden_dim, 35);
        assert_eq!(cfg.word_hidden_dim, 128);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = parse_config("learning_rte = 0.1\n", "c").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = parse_config("# hello\n\nunits = char,byte\n", "c").unwrap();
        assert!(cfg.units.chars && cfg.units.bytes && !cfg.units.phonemes);
    }

    #[test]
    fn round_trips_through_text() {
        let mut cfg = TrainConfig::default();
        cfg.seed = 77;
        cfg.units = UnitSet::parse("phoneme").unwrap();
        cfg.use_word_embeddings = true;
        let parsed = parse_config(&config_to_string(&cfg), "c").unwrap();
        assert_eq!(parsed, cfg);
    }
}
