#include "gcoach/corpus.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/script.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace gcoach {

std::string_view to_string(GestureKind kind) {
    switch (kind) {
    case GestureKind::iconic: return "iconic";
    case GestureKind::metaphoric: return "metaphoric";
    case GestureKind::deictic: return "deictic";
    }
    return "iconic";
}

std::optional<GestureKind> parse_gesture_kind(std::string_view s) {
    if (s == "iconic") return GestureKind::iconic;
    if (s == "metaphoric") return GestureKind::metaphoric;
    if (s == "deictic") return GestureKind::deictic;
    return std::nullopt;
}

GestureDatabase::GestureDatabase(std::vector<GestureEntry> entries) : entries_(std::move(entries)) {
    manifest_.entry_count = entries_.size();
}

const GestureEntry* GestureDatabase::find(std::string_view entry_id) const {
    for (const auto& e : entries_)
        if (e.entry_id == entry_id) return &e;
    return nullptr;
}

const GestureEntry* GestureDatabase::find_by_clip(std::string_view clip_uri) const {
    for (const auto& e : entries_)
        if (e.clip_uri == clip_uri) return &e;
    return nullptr;
}

void GestureDatabase::set_index(VectorIndex index, std::string model) {
    if (index.size() != entries_.size()) throw InputError("index size does not match entry count");
    index_ = std::move(index);
    manifest_.model = std::move(model);
    manifest_.entry_count = entries_.size();
}

namespace {

template <typename T>
T required(const nlohmann::json& rec, const char* key, std::size_t line) {
    if (!rec.contains(key)) throw LoadError(std::string("missing field \"") + key + "\"", line);
    try {
        return rec.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw LoadError(std::string("field \"") + key + "\" has the wrong type", line);
    }
}

} // namespace

DatabaseLoad parse_database(std::istream& in) {
    DatabaseLoad out;
    std::vector<GestureEntry> entries;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LoadError(std::string("malformed record: ") + e.what(), line_no);
        }
        if (!rec.is_object()) throw LoadError("record is not an object", line_no);

        GestureEntry e;
        e.entry_id = required<std::string>(rec, "entry_id", line_no);
        e.region_text = required<std::string>(rec, "region_text", line_no);
        e.talk_id = required<std::string>(rec, "talk_id", line_no);
        e.clip_uri = required<std::string>(rec, "clip_uri", line_no);
        e.duration_s = required<double>(rec, "duration_s", line_no);

        std::vector<std::string> problems;
        if (rec.contains("gesture_kind") && !rec["gesture_kind"].is_null()) {
            if (!rec["gesture_kind"].is_string()) throw LoadError("field \"gesture_kind\" has the wrong type", line_no);
            const auto kind = rec["gesture_kind"].get<std::string>();
            e.gesture_kind = parse_gesture_kind(kind);
            if (!e.gesture_kind) problems.push_back("unknown gesture_kind '" + kind + "'");
        }
        if (e.entry_id.empty()) problems.push_back("empty entry_id");
        if (e.clip_uri.empty()) problems.push_back("empty clip_uri");
        const auto words = normalize_words(e.region_text).size();
        if (words == 0) problems.push_back("empty region_text");
        if (words > kMaxRegionWords)
            problems.push_back("region_text has " + std::to_string(words) + " words (max " +
                               std::to_string(kMaxRegionWords) + ")");
        if (!(std::isfinite(e.duration_s) && e.duration_s > 0.0 && e.duration_s <= kMaxClipSeconds))
            problems.push_back("duration_s must be in (0, 10]");
        if (!e.entry_id.empty() && ids.count(e.entry_id)) problems.push_back("duplicate entry_id");

        if (!problems.empty()) {
            std::string msg;
            for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
            out.errors.push_back({line_no, e.entry_id, msg});
            continue;
        }
        if (words > kWarnRegionWords) {
            out.warnings.push_back({line_no, e.entry_id,
                                    "region_text has " + std::to_string(words) + " words (unusually long)"});
        }
        ids.insert(e.entry_id);
        entries.push_back(std::move(e));
    }
    out.db = GestureDatabase(std::move(entries));
    return out;
}

DatabaseLoad load_database(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string(), 0);
    return parse_database(in);
}

nlohmann::ordered_json to_json(const GestureEntry& entry) {
    nlohmann::ordered_json j;
    j["entry_id"] = entry.entry_id;
    j["region_text"] = entry.region_text;
    j["talk_id"] = entry.talk_id;
    j["clip_uri"] = entry.clip_uri;
    j["duration_s"] = entry.duration_s;
    if (entry.gesture_kind) {
        j["gesture_kind"] = std::string(to_string(*entry.gesture_kind));
    } else {
        j["gesture_kind"] = nullptr;
    }
    return j;
}

void write_database(std::ostream& out, const GestureDatabase& db) {
    for (const auto& e : db.entries()) out << to_json(e).dump() << '\n';
}

void precompute_embeddings(GestureDatabase& db, Embedder& embedder) {
    std::vector<std::string> texts;
    texts.reserve(db.entries().size());
    for (const auto& e : db.entries()) texts.push_back(e.region_text);
    auto vectors = embedder.embed_many(texts);

    VectorIndex index;
    for (std::size_t i = 0; i < vectors.size(); ++i) index.add(db.entries()[i].entry_id, std::move(vectors[i].values));
    db.set_index(std::move(index), embedder.model());
}

nlohmann::ordered_json to_json(const AnnotatedSample& sample) {
    nlohmann::ordered_json j;
    j["sample_id"] = sample.sample_id;
    j["text"] = sample.text;
    j["regions"] = sample.regions;
    j["origin"] = sample.origin == SampleOrigin::human ? "human" : "synthetic";
    j["verified"] = sample.verified;
    return j;
}

AnnotatedSample sample_from_json(const nlohmann::json& j) {
    AnnotatedSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.regions = j.at("regions").get<std::vector<std::string>>();
    const auto origin = j.value("origin", std::string("human"));
    if (origin == "human") {
        s.origin = SampleOrigin::human;
    } else if (origin == "synthetic") {
        s.origin = SampleOrigin::synthetic;
    } else {
        throw InputError("unknown sample origin '" + origin + "'");
    }
    s.verified = j.value("verified", s.origin == SampleOrigin::human);
    return s;
}

std::vector<AnnotatedSample> load_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string(), 0);
    std::vector<AnnotatedSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(std::string("malformed sample: ") + e.what(), line_no);
        } catch (const InputError& e) {
            throw LoadError(e.what(), line_no);
        }
    }
    return out;
}

bool regions_occur_verbatim(const AnnotatedSample& sample) {
    Chunk chunk;
    chunk.chunk_id = sample.sample_id;
    chunk.raw_text = sample.text;
    chunk.tokens = tokenize(sample.text);
    for (const auto& r : sample.regions) {
        if (!locate_phrase(chunk, r)) return false;
    }
    return true;
}

AnnotatedSample mark_verified(AnnotatedSample sample) {
    if (!regions_occur_verbatim(sample))
        throw InputError("sample '" + sample.sample_id + "' has regions missing from its text");
    sample.verified = true;
    return sample;
}

std::string build_augmentation_prompt(const AnnotatedSample& sample, std::size_t count) {
    std::ostringstream p;
    p << "You are an expert in public speaking. Below is a TED talk transcript excerpt together with its "
         "Emphasis Areas, the phrases where the speaker performed semantic gestures.\n"
      << "Write " << count << " new transcript excerpts that are structurally and semantically similar to the "
      << "original but adapted to different TED talk topics, each about as long as the original, and give "
         "the Emphasis Areas for each. Every Emphasis Area must appear word for word in its transcript.\n"
      << "Answer with exactly " << count
      << " lines, one JSON object per line: {\"text\": \"<transcript>\", \"regions\": [\"<phrase>\", ...]}\n\n"
      << "Text: " << sample.text << "\n"
      << "Emphasis Areas:";
    for (std::size_t i = 0; i < sample.regions.size(); ++i) p << ' ' << (i + 1) << ") " << sample.regions[i];
    return p.str();
}

namespace {

std::vector<nlohmann::json> candidate_records(const std::string& completion) {
    std::vector<nlohmann::json> out;
    auto whole = nlohmann::json::parse(completion, nullptr, false);
    if (!whole.is_discarded() && whole.is_array()) {
        for (auto& r : whole) out.push_back(r);
        return out;
    }
    std::istringstream lines(completion);
    std::string line;
    while (std::getline(lines, line)) {
        const auto start = line.find('{');
        if (start == std::string::npos) continue;
        auto rec = nlohmann::json::parse(line.substr(start), nullptr, false);
        if (!rec.is_discarded() && rec.is_object()) out.push_back(std::move(rec));
    }
    return out;
}

} // namespace

AugmentResult augment_sample(const AnnotatedSample& sample, CompletionProvider& provider, std::size_t count) {
    if (sample.origin != SampleOrigin::human) throw InputError("only human samples can be augmented");
    if (count == 0) throw InputError("augmentation count must be >= 1");

    const auto completion = provider.complete(build_augmentation_prompt(sample, count));
    AugmentResult result;
    std::size_t seen = 0;
    for (const auto& rec : candidate_records(completion)) {
        ++seen;
        if (result.samples.size() == count) break;
        AnnotatedSample out;
        try {
            out.text = rec.at("text").get<std::string>();
            out.regions = rec.at("regions").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            result.warnings.push_back("output " + std::to_string(seen) + " lacks text/regions");
            continue;
        }
        out.sample_id = sample.sample_id + "-aug" + std::to_string(result.samples.size() + 1);
        out.origin = SampleOrigin::synthetic;
        out.verified = false;
        if (normalize_words(out.text).empty() || out.regions.empty()) {
            result.warnings.push_back("output " + std::to_string(seen) + " is empty");
            continue;
        }
        if (!regions_occur_verbatim(out)) {
            result.warnings.push_back("output " + std::to_string(seen) + " has regions absent from its text");
            continue;
        }
        result.samples.push_back(std::move(out));
    }
    if (result.samples.size() < count) {
        result.warnings.push_back("shortfall: " + std::to_string(result.samples.size()) + " of " +
                                  std::to_string(count) + " augmented samples validated");
    }
    return result;
}

} // namespace gcoach
