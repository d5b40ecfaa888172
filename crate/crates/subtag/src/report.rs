//! Plain-text report rendering. Every report is deterministic: identical
//! inputs produce byte-identical output, and nothing here emits
//! timestamps.

use std::fmt::Write as _;

use subtag_core::eval::{EvalReport, OovReport, VocabReport};
use subtag_core::train::EpochRecord;

use crate::ablate::AblateRow;

/// One line per epoch: `epoch<TAB>train_loss<TAB>dev_p<TAB>dev_r<TAB>dev_f1`.
pub fn epoch_log_to_string(log: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in log {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.2}\t{:.2}\t{:.2}",
            r.epoch, r.train_loss, r.dev.precision, r.dev.recall, r.dev.f1
        );
    }
    out
}

/// Per-label counts table followed by the `P<TAB>R<TAB>F1` summary line;
/// the OOV report is appended when present.
pub fn eval_report_to_string(report: &EvalReport, oov: Option<&OovReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "label\ttp\tfp\tfn\tprecision\trecall\tf1");
    for (label, prf) in &report.per_label {
        let _ = writeln!(
            out,
            "{label}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}",
            prf.true_positives,
            prf.false_positives,
            prf.false_negatives,
            prf.precision,
            prf.recall,
            prf.f1
        );
    }
    let o = &report.overall;
    let _ = writeln!(
        out,
        "overall\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}",
        o.true_positives, o.false_positives, o.false_negatives, o.precision, o.recall, o.f1
    );
    let _ = writeln!(out, "{:.2}\t{:.2}\t{:.2}", o.precision, o.recall, o.f1);
    if let Some(oov) = oov {
        out.push_str(&oov_report_to_string(oov));
    }
    out
}

pub fn oov_report_to_string(oov: &OovReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "oov_utterances\t{}", oov.utterances_with_oov);
    let _ = writeln!(out, "oov_tokens\t{}", oov.oov_token_count);
    let u = &oov.prf_on_oov_utterances;
    let _ = writeln!(
        out,
        "oov_utterance_prf\t{:.2}\t{:.2}\t{:.2}",
        u.precision, u.recall, u.f1
    );
    let t = &oov.prf_on_oov_tokens;
    let _ = writeln!(
        out,
        "oov_token_prf\t{:.2}\t{:.2}\t{:.2}",
        t.precision, t.recall, t.f1
    );
    out
}

/// Vocabulary sizes and parameter accounting, one `name<TAB>value` line
/// each.
pub fn vocab_report_to_string(r: &VocabReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "char_vocab\t{}", r.char_vocab);
    let _ = writeln!(out, "phoneme_vocab\t{}", r.phoneme_vocab);
    let _ = writeln!(out, "byte_vocab\t{}", r.byte_vocab);
    let _ = writeln!(out, "combined_subword_vocab\t{}", r.combined_subword);
    let _ = writeln!(out, "word_vocab\t{}", r.word_vocab);
    let _ = writeln!(out, "total_params\t{}", r.total_params);
    let _ = writeln!(out, "subword_only_params\t{}", r.subword_only_params);
    let _ = writeln!(out, "word_embedding_param_delta\t{}", r.word_embedding_param_delta);
    out
}

/// The ablation results matrix: one row per configuration with per-seed
/// and mean dev F1.
pub fn ablation_to_string(rows: &[AblateRow]) -> String {
    let n_seeds = rows.first().map_or(0, |r| r.f1.len());
    let mut out = String::from("units\tword_embeddings");
    for i in 0..n_seeds {
        let _ = write!(out, "\tf1_seed{i}");
    }
    out.push_str("\tmean_f1\n");
    for row in rows {
        let _ = write!(out, "{}\t{}", row.units, row.word_embeddings);
        for f1 in &row.f1 {
            let _ = write!(out, "\t{f1:.2}");
        }
        let _ = writeln!(out, "\t{:.2}", row.mean_f1);
    }
    out
}
