#include "sern/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace sern {

namespace {

bool is_word_char(unsigned char c) {
    // Multibyte UTF-8 units pass through as word characters.
    return std::isalnum(c) || c >= 0x80;
}

bool is_space_char(unsigned char c) { return std::isspace(c); }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_space_char(c)) {
            flush();
        } else if (is_word_char(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'' && !current.empty() && i + 1 < text.size() &&
                   is_word_char(static_cast<unsigned char>(text[i + 1]))) {
            // clitic: "i'm" -> "i", "'m"
            flush();
            current.push_back('\'');
        } else {
            flush();
            tokens.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    flush();
    return tokens;
}

Vocabulary Vocabulary::build(const std::vector<RawDialog>& training_dialogs, int min_frequency) {
    if (min_frequency < 1) throw ContractError("min_frequency must be >= 1");
    if (training_dialogs.empty()) throw ContractError("cannot build a vocabulary from an empty corpus");

    std::map<std::string, std::size_t> counts;
    for (const RawDialog& d : training_dialogs) {
        for (const RawUtterance& u : d.utterances) {
            for (std::string& t : tokenize(u.text)) counts[std::move(t)]++;
        }
    }
    if (counts.empty()) throw ContractError("training corpus contains no tokens");

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [token, count] : counts) {
        if (count >= static_cast<std::size_t>(min_frequency)) kept.emplace_back(token, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> tokens{"<pad>", "<unk>"};
    tokens.reserve(kept.size() + 2);
    for (auto& [token, count] : kept) tokens.push_back(token);
    return from_tokens(std::move(tokens), min_frequency);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_frequency) {
    if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
        throw ContractError("vocabulary token list must start with <pad>, <unk>");
    }
    Vocabulary v;
    v.min_frequency_ = min_frequency;
    v.id_to_token_ = std::move(tokens);
    for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
        auto [it, inserted] = v.token_to_id_.emplace(v.id_to_token_[i], static_cast<int>(i));
        if (!inserted) throw ContractError("duplicate vocabulary token: " + v.id_to_token_[i]);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= static_cast<int>(id_to_token_.size())) {
        throw ContractError("vocabulary id out of range: " + std::to_string(id));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    for (const std::string& t : id_to_token_) {
        for (char c : t) mix(static_cast<unsigned char>(c));
        mix('\n');
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

EmotionSet EmotionSet::regime(int n_classes) {
    EmotionSet e;
    e.omitted = {"surprised", "fearful", "disgusted", "other", "xxx"};
    switch (n_classes) {
        case 6:
            e.classes = {"angry", "excited", "frustrated", "happy", "neutral", "sad"};
            break;
        case 5:
            e.classes = {"angry", "excited", "happy", "neutral", "sad"};
            e.omitted.insert("frustrated");
            break;
        case 4:
            e.classes = {"angry", "happy", "neutral", "sad"};
            e.merges["excited"] = "happy";
            e.omitted.insert("frustrated");
            break;
        default:
            throw ContractError("emotion regime must be 4, 5 or 6, got " +
                                std::to_string(n_classes));
    }
    return e;
}

std::optional<int> EmotionSet::label_id(const std::string& label) const {
    std::string key;
    key.reserve(label.size());
    for (char c : label) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    auto merged = merges.find(key);
    if (merged != merges.end()) key = merged->second;

    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == key) return static_cast<int>(i);
    }
    if (omitted.count(key)) return std::nullopt;
    throw ContractError("unknown emotion label: \"" + label + "\"");
}

int EmotionSet::index_of(const std::string& cls) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == cls) return static_cast<int>(i);
    }
    throw ContractError("emotion class not in set: " + cls);
}

std::optional<EncodedDialog> encode(const RawDialog& dialog, const Vocabulary& vocab,
                                    const EmotionSet& emotions) {
    EncodedDialog out;
    out.dialog_id = dialog.dialog_id;
    out.session = dialog.session;
    for (const RawUtterance& u : dialog.utterances) {
        std::optional<int> label = emotions.label_id(u.label);
        if (!label) continue;  // omitted category: drop the utterance entirely
        std::vector<std::string> toks = tokenize(u.text);
        if (toks.empty()) continue;
        EncodedUtterance eu;
        eu.token_ids.reserve(toks.size());
        for (const std::string& t : toks) eu.token_ids.push_back(vocab.id(t));
        eu.label = *label;
        eu.speaker = u.speaker;
        eu.text = u.text;
        out.utterances.push_back(std::move(eu));
    }
    if (out.utterances.empty()) return std::nullopt;
    return out;
}

std::vector<EncodedDialog> encode_corpus(const std::vector<RawDialog>& dialogs,
                                         const Vocabulary& vocab, const EmotionSet& emotions) {
    std::vector<EncodedDialog> out;
    out.reserve(dialogs.size());
    for (const RawDialog& d : dialogs) {
        if (auto enc = encode(d, vocab, emotions)) out.push_back(std::move(*enc));
    }
    return out;
}

CorpusSplit split_corpus(const std::vector<RawDialog>& dialogs, const std::string& holdout_session,
                         double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ContractError("validation_fraction must be in (0, 1)");
    }

    CorpusSplit split;
    std::vector<const RawDialog*> rest;
    for (const RawDialog& d : dialogs) {
        if (d.session == holdout_session) {
            split.test.push_back(d);
        } else {
            rest.push_back(&d);
        }
    }
    if (split.test.empty()) {
        throw ContractError("holdout session \"" + holdout_session + "\" absent from corpus");
    }
    if (rest.size() < 2) {
        throw ContractError("need at least 2 non-test dialogs to form train and validation");
    }

    const std::size_t n = rest.size();
    std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * n));
    n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));

    // Seeded Fisher-Yates over indices; avoids std::shuffle's
    // implementation-defined draws.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = rng() % (i + 1);
        std::swap(order[i], order[j]);
    }

    std::vector<bool> in_validation(n, false);
    for (std::size_t i = 0; i < n_val; ++i) in_validation[order[i]] = true;
    for (std::size_t i = 0; i < n; ++i) {
        (in_validation[i] ? split.validation : split.train).push_back(*rest[i]);
    }
    return split;
}

std::vector<std::size_t> corpus_stats(const std::vector<EncodedDialog>& dialogs,
                                      std::size_t n_classes) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (const EncodedDialog& d : dialogs) {
        for (const EncodedUtterance& u : d.utterances) {
            if (u.label < 0 || static_cast<std::size_t>(u.label) >= n_classes) {
                throw ContractError("label id " + std::to_string(u.label) +
                                    " outside the active emotion set");
            }
            counts[static_cast<std::size_t>(u.label)]++;
        }
    }
    return counts;
}

// ---------------------------------------------------------------------------
// Corpus file I/O
// ---------------------------------------------------------------------------

using nlohmann::json;

std::vector<RawDialog> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path.string());

    std::vector<RawDialog> dialogs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            RawDialog d;
            d.dialog_id = j.at("dialog_id").get<std::string>();
            d.session = j.at("session").get<std::string>();
            for (const json& ju : j.at("utterances")) {
                RawUtterance u;
                u.speaker = ju.at("speaker").get<std::string>();
                u.text = ju.at("text").get<std::string>();
                u.label = ju.at("label").get<std::string>();
                d.utterances.push_back(std::move(u));
            }
            if (d.utterances.empty()) {
                throw IoError(path.string() + ":" + std::to_string(line_no) +
                              ": dialog has no utterances");
            }
            dialogs.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return dialogs;
}

void save_corpus(const std::filesystem::path& path, const std::vector<RawDialog>& dialogs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file: " + path.string());
    for (const RawDialog& d : dialogs) {
        json j;
        j["dialog_id"] = d.dialog_id;
        j["session"] = d.session;
        json utts = json::array();
        for (const RawUtterance& u : d.utterances) {
            utts.push_back({{"speaker", u.speaker}, {"text", u.text}, {"label", u.label}});
        }
        j["utterances"] = std::move(utts);
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

namespace {

std::string session_of(const std::string& dialog_id) {
    if (dialog_id.rfind("Ses", 0) == 0 && dialog_id.size() >= 5) return dialog_id.substr(0, 5);
    auto underscore = dialog_id.find('_');
    return underscore == std::string::npos ? dialog_id : dialog_id.substr(0, underscore);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

RawDialog ingest_generic_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    RawDialog d;
    d.dialog_id = file.stem().string();
    d.session = session_of(d.dialog_id);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw IoError(file.string() + ":" + std::to_string(line_no) +
                          ": expected speaker<TAB>label<TAB>text");
        }
        RawUtterance u;
        u.speaker = trim(line.substr(0, t1));
        u.label = trim(line.substr(t1 + 1, t2 - t1 - 1));
        u.text = trim(line.substr(t2 + 1));
        d.utterances.push_back(std::move(u));
    }
    if (d.utterances.empty()) throw IoError(file.string() + ": no utterances");
    return d;
}

const std::map<std::string, std::string>& iemocap_code_map() {
    static const std::map<std::string, std::string> codes = {
        {"ang", "angry"},     {"exc", "excited"},  {"fru", "frustrated"},
        {"hap", "happy"},     {"neu", "neutral"},  {"sad", "sad"},
        {"sur", "surprised"}, {"fea", "fearful"},  {"dis", "disgusted"},
        {"oth", "other"},     {"xxx", "xxx"},
    };
    return codes;
}

// EmoEvaluation summary lines: "[start - end]\t<utterance_id>\t<code>\t[v, a, d]"
std::map<std::string, std::string> parse_emo_evaluation(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::map<std::string, std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] != '[') continue;
        std::istringstream fields(line);
        std::string span, utt_id, code;
        if (!std::getline(fields, span, '\t') || !std::getline(fields, utt_id, '\t') ||
            !std::getline(fields, code, '\t')) {
            continue;
        }
        auto mapped = iemocap_code_map().find(trim(code));
        if (mapped != iemocap_code_map().end()) labels[trim(utt_id)] = mapped->second;
    }
    return labels;
}

// Transcription lines: "Ses01F_impro01_F000 [006.2901-008.2357]: Excuse me."
RawDialog ingest_iemocap_dialog(const std::filesystem::path& transcript,
                                const std::filesystem::path& emo_eval) {
    std::ifstream in(transcript);
    if (!in) throw IoError("cannot open " + transcript.string());
    const std::map<std::string, std::string> labels = parse_emo_evaluation(emo_eval);

    RawDialog d;
    d.dialog_id = transcript.stem().string();
    d.session = session_of(d.dialog_id);

    std::string line;
    while (std::getline(in, line)) {
        const std::size_t space = line.find(' ');
        if (space == std::string::npos || space == 0) continue;
        const std::string utt_id = line.substr(0, space);
        if (utt_id.rfind(d.dialog_id, 0) != 0) continue;  // turn without timing info
        const std::size_t colon = line.find(": ", space);
        if (colon == std::string::npos) continue;

        RawUtterance u;
        u.text = trim(line.substr(colon + 2));
        const std::size_t tail = utt_id.find_last_of('_');
        u.speaker = (tail != std::string::npos && tail + 1 < utt_id.size())
                        ? utt_id.substr(tail + 1, 1)
                        : "?";
        auto found = labels.find(utt_id);
        u.label = found == labels.end() ? "xxx" : found->second;
        if (!u.text.empty()) d.utterances.push_back(std::move(u));
    }
    if (d.utterances.empty()) throw IoError(transcript.string() + ": no utterances");
    return d;
}

std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir,
                                                const std::string& extension) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

IngestResult ingest_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }

    IngestResult result;

    // IEMOCAP layout?
    std::vector<std::filesystem::path> sessions;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("Session", 0) == 0 &&
            std::filesystem::is_directory(entry.path() / "dialog" / "transcriptions")) {
            sessions.push_back(entry.path());
        }
    }
    std::sort(sessions.begin(), sessions.end());

    if (!sessions.empty()) {
        for (const auto& session : sessions) {
            for (const auto& transcript :
                 sorted_files(session / "dialog" / "transcriptions", ".txt")) {
                const auto emo_eval =
                    session / "dialog" / "EmoEvaluation" / transcript.filename();
                try {
                    result.dialogs.push_back(ingest_iemocap_dialog(transcript, emo_eval));
                } catch (const Error& e) {
                    result.file_errors.push_back(e.what());
                }
            }
        }
        return result;
    }

    const auto files = sorted_files(dir, ".txt");
    if (files.empty()) throw IoError("no .txt dialog files in " + dir.string());
    for (const auto& file : files) {
        try {
            result.dialogs.push_back(ingest_generic_file(file));
        } catch (const Error& e) {
            result.file_errors.push_back(e.what());
        }
    }
    return result;
}

}  // namespace sern
