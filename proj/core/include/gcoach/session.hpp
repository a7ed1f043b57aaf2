#pragma once

#include "gcoach/completion.hpp"
#include "gcoach/config.hpp"
#include "gcoach/corpus.hpp"
#include "gcoach/embedding.hpp"
#include "gcoach/emphasis.hpp"
#include "gcoach/retrieval.hpp"
#include "gcoach/script.hpp"
#include "gcoach/tracker.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

struct ChunkResult {
    std::string chunk_id;
    std::vector<GestureRegion> regions;
    std::vector<Recommendation> recommendations;
    std::vector<std::string> warnings;
    std::optional<std::string> error; // pipeline failure, retryable
};

// propose -> filter -> retrieve -> select over a loaded, indexed database.
class Pipeline {
public:
    struct Options {
        double filter_threshold = kDefaultFilterThreshold;
        std::size_t knn_k = kDefaultCandidates;
    };

    Pipeline(GestureDatabase db, std::shared_ptr<Embedder> embedder, std::shared_ptr<CompletionProvider> emphasis,
             std::shared_ptr<CompletionProvider> selection, Options options);

    // Loads and indexes the database and builds providers from configuration.
    static std::shared_ptr<Pipeline> from_config(const ServiceConfig& config);

    ChunkResult run_chunk(const Chunk& chunk) const;

    const GestureDatabase& database() const noexcept { return db_; }
    const Options& options() const noexcept { return options_; }

private:
    GestureDatabase db_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<CompletionProvider> emphasis_;
    std::shared_ptr<CompletionProvider> selection_;
    Options options_;
};

nlohmann::ordered_json to_json(const GestureRegion& region);
GestureRegion region_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Recommendation& rec);
Recommendation recommendation_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ChunkResult& result);
ChunkResult chunk_result_from_json(const nlohmann::json& j);

// Offline pipeline output for a whole script; deterministic for
// deterministic providers.
nlohmann::ordered_json recommend_script(const Script& script, const Pipeline& pipeline);

enum class PatchAction { select_rank, remove, restore };

struct PatchRequest {
    PatchAction action = PatchAction::select_rank;
    std::size_t rank = 0;
};

// {"action": "select_rank", "rank": k} | {"action": "delete"} | {"action": "restore"}
PatchRequest parse_patch(const nlohmann::json& j);

struct PaletteEdit {
    std::optional<std::size_t> selected_rank;
    bool deleted = false;
};

struct TranscriptEntry {
    std::string word;
    std::int64_t ts = 0;
    long flow_index = -1;
};

struct RunRecord {
    std::string run_id;
    std::string chunk_id;
    std::vector<TranscriptEntry> transcript;
    std::vector<CueEvent> cues;
};

struct Session {
    std::string session_id;
    std::string created_at;
    std::string document;
    nlohmann::ordered_json config; // frozen snapshot
    Script script;
    std::map<std::string, ChunkResult> chunks;
    std::map<std::string, PaletteEdit> palette;
    std::vector<RunRecord> runs;

    const GestureRegion* find_region(std::string_view region_id, std::string* chunk_id = nullptr) const;
};

// Append-only event log, one file of JSON lines per session.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path dir);

    bool exists(std::string_view session_id) const;
    std::vector<std::string> list() const;
    void append(std::string_view session_id, const std::vector<nlohmann::ordered_json>& events);
    std::vector<nlohmann::json> read(std::string_view session_id) const;

private:
    std::filesystem::path path_for(std::string_view session_id) const;
    std::filesystem::path dir_;
};

// Replays a session's event log.
Session replay_session(const std::vector<nlohmann::json>& events);

class RehearsalStream;

struct ClipFile {
    std::filesystem::path path;
    std::string content_type;
};

class RehearsalService {
public:
    RehearsalService(ServiceConfig config, std::shared_ptr<const Pipeline> pipeline);
    ~RehearsalService();

    // Throws LoadError (with line) for a malformed document; nothing is persisted then.
    std::string create_session(std::string_view document);
    nlohmann::ordered_json get_session(std::string_view session_id) const;
    nlohmann::ordered_json patch_region(std::string_view session_id, std::string_view region_id,
                                        const PatchRequest& patch);
    // Re-runs the pipeline for chunks whose last attempt failed.
    nlohmann::ordered_json retry_failed(std::string_view session_id);

    // Throws NotFoundError for unknown session/chunk and ConflictError when
    // the chunk already has a live stream.
    std::unique_ptr<RehearsalStream> open_stream(std::string_view session_id, std::string_view chunk_id);

    // Regions that would be cued in a run started now, in span order.
    std::vector<TrackedRegion> cue_schedule(std::string_view session_id, std::string_view chunk_id) const;

    ClipFile get_clip(std::string_view clip_uri) const;

    const ServiceConfig& config() const noexcept { return config_; }
    std::size_t session_count() const;

private:
    struct Slot;

    std::shared_ptr<Slot> slot(std::string_view session_id) const;
    nlohmann::ordered_json render(const Session& session) const;
    nlohmann::ordered_json render_recommendation(const Session& session, const Recommendation& rec) const;
    std::vector<TrackedRegion> schedule_locked(const Session& session, std::string_view chunk_id) const;

    ServiceConfig config_;
    std::shared_ptr<const Pipeline> pipeline_;
    SessionStore store_;
    mutable std::mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Slot>, std::less<>> sessions_;
};

// Transport-independent rehearsal protocol for one chunk. Each incoming line
// yields zero or more outgoing single-line JSON messages.
class RehearsalStream {
public:
    struct Hooks {
        std::function<std::vector<TrackedRegion>()> schedule;
        std::function<std::string()> next_run_id;
        std::function<void(const RunRecord&)> persist;
        std::function<void()> release;
    };

    RehearsalStream(Chunk chunk, TrackerConfig config, Hooks hooks);
    ~RehearsalStream();
    RehearsalStream(const RehearsalStream&) = delete;
    RehearsalStream& operator=(const RehearsalStream&) = delete;

    std::vector<std::string> on_message(std::string_view line);

    // Persists the active run, if any, and releases the chunk. Idempotent.
    void close();

    bool running() const noexcept { return run_.has_value(); }
    const SpeechFlowState* state() const noexcept { return run_ ? &run_->state : nullptr; }

private:
    struct ActiveRun {
        SpeechFlowState state;
        std::vector<TrackedRegion> regions;
        RunRecord record;
        std::optional<std::int64_t> last_ts;
    };

    void finish_run();

    Chunk chunk_;
    TrackerConfig config_;
    Hooks hooks_;
    std::optional<ActiveRun> run_;
    bool closed_ = false;
};

nlohmann::ordered_json cue_message(const CueEvent& cue);
nlohmann::ordered_json flow_message(long flow_index);
nlohmann::ordered_json error_message(std::string_view code);

} // namespace gcoach
