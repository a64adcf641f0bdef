use std::collections::BTreeMap;

use simmc_core::corpus::Corpus;

use crate::task::ParaphraseSubmission;

/// Corpus with each turn's utterance replaced by its accepted paraphrase, or
/// reset to the template where there is none. Submissions are matched to
/// dialogs by task id; ones whose paraphrase count does not match the dialog
/// are ignored. Only utterance strings change.
pub fn export_paraphrased(corpus: &Corpus, submissions: &[ParaphraseSubmission]) -> Corpus {
    let by_task: BTreeMap<&str, &ParaphraseSubmission> = submissions.iter().map(|s| (s.task_id.as_str(), s)).collect();
    let mut out = corpus.clone();
    for d in &mut out.dialogs {
        let sub = by_task
            .get(d.dialog_id.as_str())
            .filter(|s| s.paraphrases.len() == d.turns.len());
        for (i, t) in d.turns.iter_mut().enumerate() {
            t.utterance = match sub {
                Some(s) => s.paraphrases[i].clone(),
                None => t.template_utterance.clone(),
            };
        }
    }
    out
}
