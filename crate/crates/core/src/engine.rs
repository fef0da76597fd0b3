use std::sync::Arc;

use crate::matcher::{EmbeddingTable, MatcherKind, Scorer, VsmIndex};
use crate::spec::{mark_utility_constraints, AppSpec, AscKind};
use crate::tagger::{build_vocabulary, rephrase_command, SynonymLexicon, TagError, TaggedCommand, Tagger, Vocabulary};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("the embedding matcher needs an embedding table")]
    MissingEmbeddings,
}

/// A spec compiled for grounding: constraint marks, vocabulary, tagger and
/// the pooled tf-idf indexes. Immutable; rebuild to change the spec.
pub struct Engine {
    spec: AppSpec,
    vocabulary: Vocabulary,
    tagger: Tagger,
    lexicon: SynonymLexicon,
    embeddings: Option<Arc<EmbeddingTable>>,
    action_index: VsmIndex,
    utility_index: VsmIndex,
}

impl Engine {
    pub fn new(spec: AppSpec, lexicon: SynonymLexicon, embeddings: Option<Arc<EmbeddingTable>>) -> Self {
        let spec = mark_utility_constraints(&spec);
        Engine {
            vocabulary: build_vocabulary(&spec),
            tagger: Tagger::new(&spec),
            action_index: VsmIndex::from_ascs(spec.actions()),
            utility_index: VsmIndex::from_ascs(spec.utilities()),
            spec,
            lexicon,
            embeddings,
        }
    }

    pub fn spec(&self) -> &AppSpec {
        &self.spec
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn lexicon(&self) -> &SynonymLexicon {
        &self.lexicon
    }

    pub fn embeddings(&self) -> Option<&Arc<EmbeddingTable>> {
        self.embeddings.as_ref()
    }

    /// Same engine with a different spec (e.g. after learning a template).
    pub fn with_spec(&self, spec: AppSpec) -> Self {
        Engine::new(spec, self.lexicon.clone(), self.embeddings.clone())
    }

    pub fn scorer(&self, kind: MatcherKind, pool: AscKind) -> Result<Scorer<'_>, EngineError> {
        Ok(match kind {
            MatcherKind::Jaccard => Scorer::Jaccard,
            MatcherKind::Vsm => Scorer::Vsm(match pool {
                AscKind::Action => &self.action_index,
                AscKind::Utility => &self.utility_index,
            }),
            MatcherKind::Embedding => {
                Scorer::Embedding(self.embeddings.as_deref().ok_or(EngineError::MissingEmbeddings)?)
            }
        })
    }

    /// Tags `command` and, unless disabled, rephrases it toward the vocabulary.
    pub fn tag(&self, command: &str, rephrase: bool) -> Result<TaggedCommand, TagError> {
        let tagged = self.tagger.tag(command)?;
        Ok(if rephrase { rephrase_command(&tagged, &self.vocabulary, &self.lexicon) } else { tagged })
    }
}
