#pragma once

#include "gcoach/completion.hpp"
#include "gcoach/embedding.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

enum class GestureKind { iconic, metaphoric, deictic };

std::string_view to_string(GestureKind kind);
std::optional<GestureKind> parse_gesture_kind(std::string_view s);

inline constexpr std::size_t kMaxRegionWords = 30;
inline constexpr std::size_t kWarnRegionWords = 15;
inline constexpr double kMaxClipSeconds = 10.0;

struct GestureEntry {
    std::string entry_id;
    std::string region_text;
    std::string talk_id;
    std::string clip_uri;
    double duration_s = 0.0;
    std::optional<GestureKind> gesture_kind;

    friend bool operator==(const GestureEntry&, const GestureEntry&) = default;
};

struct EntryIssue {
    std::size_t line = 0;
    std::string entry_id;
    std::string message;
};

struct DatabaseManifest {
    std::string model; // embedding model tag, empty before precompute
    std::size_t entry_count = 0;
};

class GestureDatabase {
public:
    GestureDatabase() = default;
    explicit GestureDatabase(std::vector<GestureEntry> entries);

    const std::vector<GestureEntry>& entries() const noexcept { return entries_; }
    const VectorIndex& index() const noexcept { return index_; }
    const DatabaseManifest& manifest() const noexcept { return manifest_; }
    bool indexed() const noexcept { return !entries_.empty() && index_.size() == entries_.size(); }

    const GestureEntry* find(std::string_view entry_id) const;
    const GestureEntry* find_by_clip(std::string_view clip_uri) const;

    void set_index(VectorIndex index, std::string model);

private:
    std::vector<GestureEntry> entries_;
    VectorIndex index_;
    DatabaseManifest manifest_;
};

struct DatabaseLoad {
    GestureDatabase db;
    std::vector<EntryIssue> errors;   // rejected entries
    std::vector<EntryIssue> warnings; // accepted with a soft violation
};

// One JSON record per line. Malformed lines throw LoadError; invariant
// violations reject the entry and are reported in errors.
DatabaseLoad parse_database(std::istream& in);
DatabaseLoad load_database(const std::filesystem::path& path);
void write_database(std::ostream& out, const GestureDatabase& db);

nlohmann::ordered_json to_json(const GestureEntry& entry);

// Embeds every region_text and installs the index. All-or-nothing: on a
// provider failure the database is left untouched and the error rethrown.
void precompute_embeddings(GestureDatabase& db, Embedder& embedder);

enum class SampleOrigin { human, synthetic };

struct AnnotatedSample {
    std::string sample_id;
    std::string text;
    std::vector<std::string> regions;
    SampleOrigin origin = SampleOrigin::human;
    bool verified = false;

    friend bool operator==(const AnnotatedSample&, const AnnotatedSample&) = default;
};

nlohmann::ordered_json to_json(const AnnotatedSample& sample);
AnnotatedSample sample_from_json(const nlohmann::json& j);
std::vector<AnnotatedSample> load_samples(const std::filesystem::path& path);

// Every region phrase occurs verbatim, after normalization, in the text.
bool regions_occur_verbatim(const AnnotatedSample& sample);

AnnotatedSample mark_verified(AnnotatedSample sample);

inline constexpr std::size_t kDefaultAugmentCount = 5;

std::string build_augmentation_prompt(const AnnotatedSample& sample, std::size_t count);

struct AugmentResult {
    std::vector<AnnotatedSample> samples;
    std::vector<std::string> warnings;
};

// Asks the provider for `count` synthetic transcripts in the style of a human
// sample. Outputs whose regions are not verbatim in their text are dropped.
AugmentResult augment_sample(const AnnotatedSample& sample, CompletionProvider& provider,
                             std::size_t count = kDefaultAugmentCount);

} // namespace gcoach
