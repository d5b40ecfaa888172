//! The ablation experiment runner: trains every subword subset with and
//! without dedicated word embeddings, plus the word-only baseline, and
//! collects dev F1 per seed.

use subtag_core::corpus::Corpus;
use subtag_core::error::Result;
use subtag_core::featurize::PhonemeLexicon;
use subtag_core::model::UnitSet;
use subtag_core::rng::derive_seed;
use subtag_core::train::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblateCell {
    pub units: UnitSet,
    pub word_embeddings: bool,
}

/// The full grid: 7 subword subsets without word embeddings, the same 7
/// with them, and the word-only baseline — 15 configurations.
pub fn standard_grid() -> Vec<AblateCell> {
    let mut grid = Vec::with_capacity(15);
    for word_embeddings in [false, true] {
        for units in UnitSet::all_subsets() {
            grid.push(AblateCell {
                units,
                word_embeddings,
            });
        }
    }
    grid.push(AblateCell {
        units: UnitSet::NONE,
        word_embeddings: true,
    });
    grid
}

#[derive(Debug, Clone)]
pub struct AblateRow {
    pub units: UnitSet,
    pub word_embeddings: bool,
    /// Best dev F1 per seed.
    pub f1: Vec<f64>,
    pub mean_f1: f64,
    pub best_epoch: Vec<usize>,
}

/// Trains every cell of the grid for `n_seeds` runs. The run seed is
/// derived deterministically from the master seed, the configuration
/// index, and the seed index, so re-running the grid reproduces every
/// number.
pub fn run_ablation(
    base: &TrainConfig,
    cells: &[AblateCell],
    n_seeds: usize,
    lexicon: &PhonemeLexicon,
    train_corpus: &Corpus,
    dev_corpus: &Corpus,
) -> Result<Vec<AblateRow>> {
    let mut rows = Vec::with_capacity(cells.len());
    for (index, cell) in cells.iter().enumerate() {
        let mut f1 = Vec::with_capacity(n_seeds);
        let mut best_epoch = Vec::with_capacity(n_seeds);
        for seed_idx in 0..n_seeds {
            let mut cfg = base.clone();
            cfg.units = cell.units;
            cfg.use_word_embeddings = cell.word_embeddings;
            cfg.seed = derive_seed(base.seed, (index as u64) * 1_000_003 + seed_idx as u64);
            let outcome = train(&cfg, lexicon.clone(), train_corpus, dev_corpus)?;
            f1.push(outcome.best.dev_f1);
            best_epoch.push(outcome.best.epoch);
        }
        let mean_f1 = f1.iter().sum::<f64>() / f1.len() as f64;
        rows.push(AblateRow {
            units: cell.units,
            word_embeddings: cell.word_embeddings,
            f1,
            mean_f1,
            best_epoch,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_fifteen_unique_cells() {
        let grid = standard_grid();
        assert_eq!(grid.len(), 15);
        for (i, a) in grid.iter().enumerate() {
            for b in &grid[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(grid.iter().filter(|c| !c.word_embeddings).count(), 7);
        assert_eq!(
            grid.iter()
                .filter(|c| c.word_embeddings && !c.units.is_empty())
                .count(),
            7
        );
        assert_eq!(grid.iter().filter(|c| c.units.is_empty()).count(), 1);
    }
}
