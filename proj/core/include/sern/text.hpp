#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sern/error.hpp"

namespace sern {

struct RawUtterance {
    std::string speaker;
    std::string text;
    std::string label;
};

struct RawDialog {
    std::string dialog_id;
    std::string session;
    std::vector<RawUtterance> utterances;
};

/// Rule-based word tokenizer: lowercase, punctuation split into standalone
/// tokens, apostrophe-initiated clitics kept together ("i'm" -> "i", "'m"),
/// whitespace collapsed. Deterministic; empty text yields an empty list.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> id mapping built from the training split only. Reserved ids:
/// PAD=0, UNK=1. Ordering is by descending training count, ties broken
/// lexicographically.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    static Vocabulary build(const std::vector<RawDialog>& training_dialogs, int min_frequency);
    /// Rebuild from a serialized id -> token list (checkpoint load).
    static Vocabulary from_tokens(std::vector<std::string> tokens, int min_frequency);

    int id(const std::string& token) const;  // kUnk when absent
    const std::string& token(int id) const;
    std::size_t size() const { return id_to_token_.size(); }
    int min_frequency() const { return min_frequency_; }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    /// FNV-1a over the ordered token list; guards checkpoint/corpus pairing.
    std::uint64_t hash() const;

private:
    std::vector<std::string> id_to_token_;
    std::map<std::string, int> token_to_id_;
    int min_frequency_ = 1;
};

std::string hash_hex(std::uint64_t h);

/// Active emotion classes plus the rules for labels outside them.
/// Six-class order is fixed as (angry, excited, frustrated, happy, neutral,
/// sad) so confusion matrices are comparable across runs.
struct EmotionSet {
    std::vector<std::string> classes;
    std::map<std::string, std::string> merges;  // e.g. excited -> happy
    std::set<std::string> omitted;              // labels dropped outright

    /// n_classes in {4, 5, 6}: 5 drops frustrated, 4 also merges excited
    /// into happy.
    static EmotionSet regime(int n_classes);

    std::size_t size() const { return classes.size(); }
    /// Active class id; nullopt when the utterance should be dropped.
    /// Throws ContractError on a label outside the known universe.
    std::optional<int> label_id(const std::string& label) const;
    int index_of(const std::string& cls) const;
};

struct EncodedUtterance {
    std::vector<int> token_ids;
    int label = -1;
    std::string speaker;
    std::string text;  // original text, kept for reporting
};

struct EncodedDialog {
    std::string dialog_id;
    std::string session;
    std::vector<EncodedUtterance> utterances;
};

/// Encode one dialog: OOV tokens become UNK, utterances with dropped labels
/// or empty token lists are removed (order of the rest preserved). Returns
/// nullopt when nothing survives.
std::optional<EncodedDialog> encode(const RawDialog& dialog, const Vocabulary& vocab,
                                    const EmotionSet& emotions);

std::vector<EncodedDialog> encode_corpus(const std::vector<RawDialog>& dialogs,
                                         const Vocabulary& vocab, const EmotionSet& emotions);

struct CorpusSplit {
    std::vector<RawDialog> train;
    std::vector<RawDialog> validation;
    std::vector<RawDialog> test;
};

/// Dialogs of `holdout_session` form the test set; the rest are split whole
/// (never within a dialog) into train/validation under `seed`.
CorpusSplit split_corpus(const std::vector<RawDialog>& dialogs, const std::string& holdout_session,
                         double validation_fraction, std::uint64_t seed);

/// Per-class utterance counts in emotion-set order.
std::vector<std::size_t> corpus_stats(const std::vector<EncodedDialog>& dialogs,
                                      std::size_t n_classes);

// --- corpus file format: one JSON dialog object per line, UTF-8 ---

std::vector<RawDialog> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<RawDialog>& dialogs);

struct IngestResult {
    std::vector<RawDialog> dialogs;
    std::vector<std::string> file_errors;  // one diagnostic per unreadable/malformed file
};

/// Ingest a directory of raw transcripts. Two layouts are recognized:
///  - generic: *.txt files, one dialog per file, lines "speaker<TAB>label<TAB>text";
///    the filename (minus extension) is the dialog id and its prefix up to the
///    first '_' is the session.
///  - IEMOCAP: Session*/dialog/transcriptions/*.txt with matching
///    Session*/dialog/EmoEvaluation/*.txt carrying the majority-vote labels.
IngestResult ingest_directory(const std::filesystem::path& dir);

}  // namespace sern
