#include "gcoach/session.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/hashing.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <unistd.h>

namespace gcoach {

// ---------------------------------------------------------------- pipeline

Pipeline::Pipeline(GestureDatabase db, std::shared_ptr<Embedder> embedder, std::shared_ptr<CompletionProvider> emphasis,
                   std::shared_ptr<CompletionProvider> selection, Options options)
    : db_(std::move(db)),
      embedder_(std::move(embedder)),
      emphasis_(std::move(emphasis)),
      selection_(std::move(selection)),
      options_(options) {
    if (!embedder_ || !emphasis_ || !selection_) throw InputError("pipeline needs an embedder and two providers");
    if (!db_.indexed()) throw InputError("pipeline needs an indexed gesture database");
}

std::shared_ptr<Pipeline> Pipeline::from_config(const ServiceConfig& config) {
    if (config.database.empty()) throw InputError("configuration lacks \"database\"");
    if (config.emphasis_provider.empty()) throw InputError("configuration lacks \"emphasis_provider\"");
    auto load = load_database(config.database);
    for (const auto& e : load.errors)
        spdlog::warn("{}:{}: rejected entry '{}': {}", config.database.string(), e.line, e.entry_id, e.message);
    for (const auto& w : load.warnings)
        spdlog::info("{}:{}: entry '{}': {}", config.database.string(), w.line, w.entry_id, w.message);
    if (load.db.entries().empty()) throw InputError("gesture database " + config.database.string() + " is empty");

    HttpProviderOptions http{config.embedding_model, config.provider_timeout, config.provider_retries};
    auto embedder = std::make_shared<CachingEmbedder>(make_embedder(config.embedder, http), config.embedding_cache);
    precompute_embeddings(load.db, *embedder);

    CompletionOptions copts{config.instruction_frame, config.provider_timeout, config.provider_retries};
    auto emphasis = make_completion_provider(config.emphasis_provider, copts);
    auto selection = config.selection_provider == config.emphasis_provider
                         ? emphasis
                         : make_completion_provider(config.selection_provider, copts);
    return std::make_shared<Pipeline>(std::move(load.db), std::move(embedder), std::move(emphasis),
                                      std::move(selection), Options{config.filter_threshold, config.knn_k});
}

ChunkResult Pipeline::run_chunk(const Chunk& chunk) const {
    ChunkResult r;
    r.chunk_id = chunk.chunk_id;
    try {
        auto proposal = propose_regions(chunk, *emphasis_, *embedder_, options_.filter_threshold);
        for (const auto& d : proposal.discarded) {
            char score[32];
            std::snprintf(score, sizeof score, "%.4f", d.best_score);
            r.warnings.push_back("discarded '" + d.phrase + "': " + d.reason + " (best " + score + ")");
        }
        r.warnings.insert(r.warnings.end(), proposal.warnings.begin(), proposal.warnings.end());
        auto recs = recommend_chunk(chunk, proposal.regions, db_, *embedder_, *selection_, options_.knn_k);
        r.warnings.insert(r.warnings.end(), recs.warnings.begin(), recs.warnings.end());
        if (recs.recommendations.size() != proposal.regions.size()) {
            r.error = "gesture retrieval failed for " +
                      std::to_string(proposal.regions.size() - recs.recommendations.size()) + " region(s)";
            return r;
        }
        r.regions = std::move(proposal.regions);
        r.recommendations = std::move(recs.recommendations);
    } catch (const PipelineError& e) {
        r.error = e.what();
    }
    return r;
}

// ---------------------------------------------------------------- json

nlohmann::ordered_json to_json(const GestureRegion& region) {
    nlohmann::ordered_json j;
    j["region_id"] = region.region_id;
    j["chunk_id"] = region.span.chunk_id;
    j["start"] = region.span.start;
    j["end"] = region.span.end;
    j["text"] = region.span.text;
    j["source"] = std::string(to_string(region.source));
    j["match_similarity"] = region.match_similarity;
    j["status"] = std::string(to_string(region.status));
    return j;
}

GestureRegion region_from_json(const nlohmann::json& j) {
    GestureRegion r;
    r.region_id = j.at("region_id").get<std::string>();
    r.span.chunk_id = j.at("chunk_id").get<std::string>();
    r.span.start = j.at("start").get<std::size_t>();
    r.span.end = j.at("end").get<std::size_t>();
    r.span.text = j.at("text").get<std::string>();
    auto source = parse_region_source(j.at("source").get<std::string>());
    auto status = parse_region_status(j.at("status").get<std::string>());
    if (!source || !status) throw InputError("region '" + r.region_id + "' has an unknown source or status");
    r.source = *source;
    r.status = *status;
    r.match_similarity = j.at("match_similarity").get<double>();
    return r;
}

nlohmann::ordered_json to_json(const Recommendation& rec) {
    nlohmann::ordered_json j;
    j["region_id"] = rec.region_id;
    auto cands = nlohmann::ordered_json::array();
    for (const auto& c : rec.candidates) {
        nlohmann::ordered_json cj;
        cj["rank"] = c.rank;
        cj["entry_id"] = c.entry_id;
        cj["similarity"] = c.similarity;
        cands.push_back(std::move(cj));
    }
    j["candidates"] = std::move(cands);
    j["selected_rank"] = rec.selected_rank;
    j["selection_source"] = std::string(to_string(rec.selection_source));
    return j;
}

Recommendation recommendation_from_json(const nlohmann::json& j) {
    Recommendation rec;
    rec.region_id = j.at("region_id").get<std::string>();
    for (const auto& cj : j.at("candidates")) {
        rec.candidates.push_back(GestureCandidate{cj.at("entry_id").get<std::string>(), cj.at("similarity").get<double>(),
                                                  cj.at("rank").get<std::size_t>()});
    }
    rec.selected_rank = j.at("selected_rank").get<std::size_t>();
    auto source = parse_selection_source(j.at("selection_source").get<std::string>());
    if (!source) throw InputError("unknown selection source");
    rec.selection_source = *source;
    if (rec.candidates.empty() || rec.selected_rank < 1 || rec.selected_rank > rec.candidates.size())
        throw InputError("recommendation '" + rec.region_id + "' has an invalid selection");
    return rec;
}

nlohmann::ordered_json to_json(const ChunkResult& result) {
    nlohmann::ordered_json j;
    j["chunk_id"] = result.chunk_id;
    auto regions = nlohmann::ordered_json::array();
    for (const auto& r : result.regions) regions.push_back(to_json(r));
    j["regions"] = std::move(regions);
    auto recs = nlohmann::ordered_json::array();
    for (const auto& r : result.recommendations) recs.push_back(to_json(r));
    j["recommendations"] = std::move(recs);
    j["warnings"] = result.warnings;
    j["error"] = result.error ? nlohmann::ordered_json(*result.error) : nlohmann::ordered_json(nullptr);
    return j;
}

ChunkResult chunk_result_from_json(const nlohmann::json& j) {
    ChunkResult r;
    r.chunk_id = j.at("chunk_id").get<std::string>();
    for (const auto& rj : j.at("regions")) r.regions.push_back(region_from_json(rj));
    for (const auto& rj : j.at("recommendations")) r.recommendations.push_back(recommendation_from_json(rj));
    r.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
    return r;
}

namespace {

nlohmann::ordered_json candidate_view(const GestureCandidate& c, const GestureDatabase& db) {
    nlohmann::ordered_json cj;
    cj["rank"] = c.rank;
    cj["entry_id"] = c.entry_id;
    const auto* entry = db.find(c.entry_id);
    cj["region_text"] = entry ? entry->region_text : std::string{};
    cj["clip_uri"] = entry ? entry->clip_uri : std::string{};
    cj["similarity"] = c.similarity;
    return cj;
}

nlohmann::ordered_json recommendation_view(const Recommendation& rec, const GestureDatabase& db, std::size_t rank,
                                           SelectionSource source, bool deleted) {
    nlohmann::ordered_json j;
    j["region_id"] = rec.region_id;
    auto cands = nlohmann::ordered_json::array();
    for (const auto& c : rec.candidates) cands.push_back(candidate_view(c, db));
    j["candidates"] = std::move(cands);
    j["selected_rank"] = rank;
    j["selection_source"] = std::string(to_string(source));
    const auto* entry = db.find(rec.candidates.at(rank - 1).entry_id);
    j["clip_uri"] = entry ? entry->clip_uri : std::string{};
    j["deleted"] = deleted;
    return j;
}

nlohmann::ordered_json token_view(const Chunk& chunk) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& t : chunk.tokens) {
        nlohmann::ordered_json tj;
        tj["surface"] = t.surface;
        tj["char_start"] = t.char_start;
        tj["char_end"] = t.char_end;
        out.push_back(std::move(tj));
    }
    return out;
}

} // namespace

nlohmann::ordered_json recommend_script(const Script& script, const Pipeline& pipeline) {
    nlohmann::ordered_json out;
    auto slides = nlohmann::ordered_json::array();
    std::size_t region_count = 0;
    std::size_t region_words = 0;
    for (const auto& slide : script.slides) {
        nlohmann::ordered_json sj;
        sj["slide_id"] = slide.slide_id;
        sj["asset_ref"] = slide.asset_ref;
        auto chunks = nlohmann::ordered_json::array();
        for (const auto& chunk : slide.chunks) {
            const auto result = pipeline.run_chunk(chunk);
            nlohmann::ordered_json cj;
            cj["chunk_id"] = chunk.chunk_id;
            cj["text"] = chunk.raw_text;
            auto regions = nlohmann::ordered_json::array();
            for (const auto& r : result.regions) {
                regions.push_back(to_json(r));
                ++region_count;
                region_words += r.span.length_words();
            }
            cj["regions"] = std::move(regions);
            auto recs = nlohmann::ordered_json::array();
            for (const auto& rec : result.recommendations)
                recs.push_back(recommendation_view(rec, pipeline.database(), rec.selected_rank, rec.selection_source, false));
            cj["recommendations"] = std::move(recs);
            cj["warnings"] = result.warnings;
            cj["error"] = result.error ? nlohmann::ordered_json(*result.error) : nlohmann::ordered_json(nullptr);
            chunks.push_back(std::move(cj));
        }
        sj["chunks"] = std::move(chunks);
        slides.push_back(std::move(sj));
    }
    out["slides"] = std::move(slides);
    nlohmann::ordered_json summary;
    summary["regions"] = region_count;
    summary["mean_region_words"] =
        region_count ? static_cast<double>(region_words) / static_cast<double>(region_count) : 0.0;
    out["summary"] = std::move(summary);
    return out;
}

PatchRequest parse_patch(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("action") || !j["action"].is_string())
        throw InputError("patch needs a string \"action\"");
    const auto action = j["action"].get<std::string>();
    PatchRequest p;
    if (action == "select_rank") {
        if (!j.contains("rank") || !j["rank"].is_number_integer()) throw InputError("select_rank needs an integer rank");
        const auto rank = j["rank"].get<long long>();
        if (rank < 1) throw InputError("rank must be positive");
        p.action = PatchAction::select_rank;
        p.rank = static_cast<std::size_t>(rank);
    } else if (action == "delete") {
        p.action = PatchAction::remove;
    } else if (action == "restore") {
        p.action = PatchAction::restore;
    } else {
        throw InputError("unknown action '" + action + "'");
    }
    return p;
}

// ---------------------------------------------------------------- session

const GestureRegion* Session::find_region(std::string_view region_id, std::string* chunk_id) const {
    for (const auto& [cid, result] : chunks) {
        for (const auto& r : result.regions) {
            if (r.region_id == region_id) {
                if (chunk_id) *chunk_id = cid;
                return &r;
            }
        }
    }
    return nullptr;
}

namespace {

const Recommendation* find_recommendation(const Session& s, std::string_view region_id) {
    for (const auto& [cid, result] : s.chunks)
        for (const auto& rec : result.recommendations)
            if (rec.region_id == region_id) return &rec;
    return nullptr;
}

void apply_patch(Session& s, std::string_view region_id, const PatchRequest& patch) {
    if (!s.find_region(region_id)) throw NotFoundError("unknown region '" + std::string(region_id) + "'");
    auto& edit = s.palette[std::string(region_id)];
    switch (patch.action) {
    case PatchAction::select_rank: {
        const auto* rec = find_recommendation(s, region_id);
        if (!rec) throw InputError("region has no gesture candidates");
        if (patch.rank < 1 || patch.rank > rec->candidates.size())
            throw InputError("rank " + std::to_string(patch.rank) + " outside 1.." +
                             std::to_string(rec->candidates.size()));
        edit.selected_rank = patch.rank;
        break;
    }
    case PatchAction::remove: edit.deleted = true; break;
    case PatchAction::restore: edit.deleted = false; break;
    }
}

std::string_view action_name(PatchAction a) {
    switch (a) {
    case PatchAction::select_rank: return "select_rank";
    case PatchAction::remove: return "delete";
    case PatchAction::restore: return "restore";
    }
    return "delete";
}

nlohmann::ordered_json patch_event(std::string_view region_id, const PatchRequest& patch) {
    nlohmann::ordered_json e;
    e["event"] = "patch";
    e["region_id"] = std::string(region_id);
    e["action"] = std::string(action_name(patch.action));
    if (patch.action == PatchAction::select_rank) e["rank"] = patch.rank;
    return e;
}

nlohmann::ordered_json pipeline_event(const ChunkResult& result) {
    auto e = to_json(result);
    nlohmann::ordered_json out;
    out["event"] = "pipeline";
    for (auto& [k, v] : e.items()) out[k] = v;
    return out;
}

nlohmann::ordered_json run_event(const RunRecord& run) {
    nlohmann::ordered_json e;
    e["event"] = "run";
    e["run_id"] = run.run_id;
    e["chunk_id"] = run.chunk_id;
    auto words = nlohmann::ordered_json::array();
    for (const auto& t : run.transcript) {
        nlohmann::ordered_json w;
        w["word"] = t.word;
        w["ts"] = t.ts;
        w["flow_index"] = t.flow_index;
        words.push_back(std::move(w));
    }
    e["transcript"] = std::move(words);
    auto cues = nlohmann::ordered_json::array();
    for (const auto& c : run.cues) cues.push_back(cue_message(c));
    e["cues"] = std::move(cues);
    return e;
}

RunRecord run_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.chunk_id = j.at("chunk_id").get<std::string>();
    for (const auto& w : j.at("transcript"))
        r.transcript.push_back({w.at("word").get<std::string>(), w.at("ts").get<std::int64_t>(), w.at("flow_index").get<long>()});
    for (const auto& c : j.at("cues"))
        r.cues.push_back({c.at("region_id").get<std::string>(), c.at("clip_uri").get<std::string>(),
                          c.at("flow_index").get<long>(), c.value("onset_words", kDefaultOnsetWords)});
    return r;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void prune_palette(Session& s) {
    for (auto it = s.palette.begin(); it != s.palette.end();) {
        it = s.find_region(it->first) ? std::next(it) : s.palette.erase(it);
    }
}

} // namespace

Session replay_session(const std::vector<nlohmann::json>& events) {
    if (events.empty() || events.front().value("event", "") != "created")
        throw InputError("session log does not start with a created event");
    Session s;
    for (const auto& e : events) {
        const auto kind = e.at("event").get<std::string>();
        if (kind == "created") {
            s.session_id = e.at("session_id").get<std::string>();
            s.created_at = e.at("created_at").get<std::string>();
            s.document = e.at("document").get<std::string>();
            s.config = e.at("config");
            s.script = parse_script(s.document, s.config.value("chunk_words", std::size_t{100}));
        } else if (kind == "pipeline") {
            auto result = chunk_result_from_json(e);
            const auto id = result.chunk_id;
            s.chunks[id] = std::move(result);
            prune_palette(s);
        } else if (kind == "patch") {
            PatchRequest p;
            const auto action = e.at("action").get<std::string>();
            p.action = action == "select_rank" ? PatchAction::select_rank
                       : action == "delete"    ? PatchAction::remove
                                               : PatchAction::restore;
            p.rank = e.value("rank", std::size_t{0});
            apply_patch(s, e.at("region_id").get<std::string>(), p);
        } else if (kind == "run") {
            s.runs.push_back(run_from_json(e));
        } else {
            throw InputError("unknown session event '" + kind + "'");
        }
    }
    return s;
}

// ---------------------------------------------------------------- store

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path SessionStore::path_for(std::string_view session_id) const {
    return dir_ / (std::string(session_id) + ".jsonl");
}

bool SessionStore::exists(std::string_view session_id) const {
    return std::filesystem::exists(path_for(session_id));
}

std::vector<std::string> SessionStore::list() const {
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") out.push_back(entry.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void SessionStore::append(std::string_view session_id, const std::vector<nlohmann::ordered_json>& events) {
    std::string payload;
    for (const auto& e : events) payload += e.dump() + "\n";
    const auto path = path_for(session_id);
    std::FILE* f = std::fopen(path.c_str(), "ab");
    if (!f) throw Error("cannot open session log " + path.string());
    const bool ok = std::fwrite(payload.data(), 1, payload.size(), f) == payload.size() && std::fflush(f) == 0 &&
                    ::fsync(fileno(f)) == 0;
    std::fclose(f);
    if (!ok) throw Error("failed writing session log " + path.string());
}

std::vector<nlohmann::json> SessionStore::read(std::string_view session_id) const {
    std::ifstream in(path_for(session_id));
    if (!in) throw NotFoundError("no log for session '" + std::string(session_id) + "'");
    std::vector<nlohmann::json> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto e = nlohmann::json::parse(line, nullptr, false);
        if (e.is_discarded()) {
            // Only a torn trailing write can produce this; later lines would be lost anyway.
            spdlog::warn("session {}: ignoring unreadable log tail", session_id);
            break;
        }
        events.push_back(std::move(e));
    }
    return events;
}

// ---------------------------------------------------------------- service

struct RehearsalService::Slot {
    mutable std::shared_mutex mutex;
    Session session;
    std::set<std::string> live_chunks;
    std::size_t run_counter = 0;
};

RehearsalService::RehearsalService(ServiceConfig config, std::shared_ptr<const Pipeline> pipeline)
    : config_(std::move(config)), pipeline_(std::move(pipeline)), store_(config_.data_dir / "sessions") {
    if (!pipeline_) throw InputError("service needs a pipeline");
    for (const auto& id : store_.list()) {
        try {
            auto slot = std::make_shared<Slot>();
            slot->session = replay_session(store_.read(id));
            slot->run_counter = slot->session.runs.size();
            sessions_.emplace(slot->session.session_id, std::move(slot));
        } catch (const std::exception& e) {
            spdlog::error("cannot restore session {}: {}", id, e.what());
        }
    }
    spdlog::info("restored {} session(s) from {}", sessions_.size(), config_.data_dir.string());
}

RehearsalService::~RehearsalService() = default;

std::size_t RehearsalService::session_count() const {
    std::lock_guard lock(registry_mutex_);
    return sessions_.size();
}

std::shared_ptr<RehearsalService::Slot> RehearsalService::slot(std::string_view session_id) const {
    std::lock_guard lock(registry_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + std::string(session_id) + "'");
    return it->second;
}

std::string RehearsalService::create_session(std::string_view document) {
    const auto snapshot = config_.snapshot();
    auto script = parse_script(document, config_.chunk_words);

    Session s;
    s.created_at = utc_now();
    s.document = std::string(document);
    // stored with sorted keys, matching how it reads back from the log
    s.config = nlohmann::ordered_json::parse(nlohmann::json::parse(snapshot.dump()).dump());
    s.script = std::move(script);
    for (const auto& slide : s.script.slides)
        for (const auto& chunk : slide.chunks) s.chunks[chunk.chunk_id] = pipeline_->run_chunk(chunk);

    std::vector<nlohmann::ordered_json> events;
    {
        std::lock_guard lock(registry_mutex_);
        const auto base = content_id("s", {document, snapshot.dump()});
        s.session_id = base;
        for (int n = 2; sessions_.count(s.session_id) || store_.exists(s.session_id); ++n)
            s.session_id = base + "-" + std::to_string(n);

        nlohmann::ordered_json created;
        created["event"] = "created";
        created["session_id"] = s.session_id;
        created["created_at"] = s.created_at;
        created["document"] = s.document;
        created["config"] = s.config;
        events.push_back(std::move(created));
        for (const auto& slide : s.script.slides)
            for (const auto& chunk : slide.chunks) events.push_back(pipeline_event(s.chunks.at(chunk.chunk_id)));
        store_.append(s.session_id, events);

        auto slot = std::make_shared<Slot>();
        slot->session = std::move(s);
        sessions_.emplace(slot->session.session_id, slot);
        return slot->session.session_id;
    }
}

nlohmann::ordered_json RehearsalService::render_recommendation(const Session& session, const Recommendation& rec) const {
    std::size_t rank = rec.selected_rank;
    SelectionSource source = rec.selection_source;
    bool deleted = false;
    if (auto it = session.palette.find(rec.region_id); it != session.palette.end()) {
        if (it->second.selected_rank) {
            rank = *it->second.selected_rank;
            source = SelectionSource::user;
        }
        deleted = it->second.deleted;
    }
    return recommendation_view(rec, pipeline_->database(), rank, source, deleted);
}

nlohmann::ordered_json RehearsalService::render(const Session& s) const {
    nlohmann::ordered_json out;
    out["session_id"] = s.session_id;
    out["created_at"] = s.created_at;
    out["config"] = s.config;
    auto slides = nlohmann::ordered_json::array();
    for (const auto& slide : s.script.slides) {
        nlohmann::ordered_json sj;
        sj["slide_id"] = slide.slide_id;
        sj["asset_ref"] = slide.asset_ref;
        auto chunks = nlohmann::ordered_json::array();
        for (const auto& chunk : slide.chunks) {
            const auto& result = s.chunks.at(chunk.chunk_id);
            nlohmann::ordered_json cj;
            cj["chunk_id"] = chunk.chunk_id;
            cj["text"] = chunk.raw_text;
            cj["tokens"] = token_view(chunk);
            auto regions = nlohmann::ordered_json::array();
            for (auto r : result.regions) {
                if (auto it = s.palette.find(r.region_id); it != s.palette.end()) {
                    r.status = it->second.deleted        ? RegionStatus::deleted
                               : it->second.selected_rank ? RegionStatus::edited
                                                          : r.status;
                }
                regions.push_back(to_json(r));
            }
            cj["regions"] = std::move(regions);
            auto recs = nlohmann::ordered_json::array();
            for (const auto& rec : result.recommendations) recs.push_back(render_recommendation(s, rec));
            cj["recommendations"] = std::move(recs);
            cj["warnings"] = result.warnings;
            cj["error"] = result.error ? nlohmann::ordered_json(*result.error) : nlohmann::ordered_json(nullptr);
            cj["retryable"] = result.error.has_value();
            chunks.push_back(std::move(cj));
        }
        sj["chunks"] = std::move(chunks);
        slides.push_back(std::move(sj));
    }
    out["slides"] = std::move(slides);
    auto palette = nlohmann::ordered_json::object();
    for (const auto& [rid, edit] : s.palette) {
        nlohmann::ordered_json pj;
        pj["selected_rank"] = edit.selected_rank ? nlohmann::ordered_json(*edit.selected_rank) : nlohmann::ordered_json(nullptr);
        pj["deleted"] = edit.deleted;
        palette[rid] = std::move(pj);
    }
    out["palette"] = std::move(palette);
    auto runs = nlohmann::ordered_json::array();
    for (const auto& run : s.runs) {
        nlohmann::ordered_json rj;
        rj["run_id"] = run.run_id;
        rj["chunk_id"] = run.chunk_id;
        rj["words"] = run.transcript.size();
        rj["final_flow_index"] = run.transcript.empty() ? -1 : run.transcript.back().flow_index;
        auto cued = nlohmann::ordered_json::array();
        for (const auto& c : run.cues) cued.push_back(c.region_id);
        rj["cued"] = std::move(cued);
        runs.push_back(std::move(rj));
    }
    out["runs"] = std::move(runs);
    return out;
}

nlohmann::ordered_json RehearsalService::get_session(std::string_view session_id) const {
    auto s = slot(session_id);
    std::shared_lock lock(s->mutex);
    return render(s->session);
}

nlohmann::ordered_json RehearsalService::patch_region(std::string_view session_id, std::string_view region_id,
                                                      const PatchRequest& patch) {
    auto s = slot(session_id);
    std::unique_lock lock(s->mutex);
    Session updated = s->session;
    apply_patch(updated, region_id, patch);
    store_.append(session_id, {patch_event(region_id, patch)});
    s->session = std::move(updated);

    std::string chunk_id;
    const auto* region = s->session.find_region(region_id, &chunk_id);
    nlohmann::ordered_json out;
    if (const auto* rec = find_recommendation(s->session, region_id)) {
        out = render_recommendation(s->session, *rec);
    } else {
        out["region_id"] = std::string(region_id);
        out["deleted"] = s->session.palette[std::string(region_id)].deleted;
    }
    out["chunk_id"] = chunk_id;
    out["span"] = to_json(*region);
    return out;
}

nlohmann::ordered_json RehearsalService::retry_failed(std::string_view session_id) {
    auto s = slot(session_id);
    std::vector<const Chunk*> failed;
    {
        std::shared_lock lock(s->mutex);
        for (const auto& slide : s->session.script.slides)
            for (const auto& chunk : slide.chunks)
                if (s->session.chunks.at(chunk.chunk_id).error) failed.push_back(&chunk);
    }
    std::vector<ChunkResult> results;
    for (const auto* chunk : failed) results.push_back(pipeline_->run_chunk(*chunk));

    std::unique_lock lock(s->mutex);
    std::vector<nlohmann::ordered_json> events;
    for (const auto& r : results) events.push_back(pipeline_event(r));
    if (!events.empty()) store_.append(session_id, events);
    for (auto& r : results) {
        const auto id = r.chunk_id;
        s->session.chunks[id] = std::move(r);
    }
    prune_palette(s->session);
    return render(s->session);
}

std::vector<TrackedRegion> RehearsalService::schedule_locked(const Session& session, std::string_view chunk_id) const {
    auto it = session.chunks.find(std::string(chunk_id));
    if (it == session.chunks.end()) return {};
    std::vector<TrackedRegion> out;
    for (const auto& region : it->second.regions) {
        auto edit = session.palette.find(region.region_id);
        if (edit != session.palette.end() && edit->second.deleted) continue;
        const Recommendation* rec = nullptr;
        for (const auto& r : it->second.recommendations)
            if (r.region_id == region.region_id) rec = &r;
        if (!rec) continue;
        std::size_t rank = rec->selected_rank;
        if (edit != session.palette.end() && edit->second.selected_rank) rank = *edit->second.selected_rank;
        const auto* entry = pipeline_->database().find(rec->candidates.at(rank - 1).entry_id);
        out.push_back(TrackedRegion{region.region_id, region.span.start, region.span.end,
                                    entry ? entry->clip_uri : std::string{}});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    return out;
}

std::vector<TrackedRegion> RehearsalService::cue_schedule(std::string_view session_id, std::string_view chunk_id) const {
    auto s = slot(session_id);
    std::shared_lock lock(s->mutex);
    if (!s->session.script.find_chunk(chunk_id)) throw NotFoundError("unknown chunk '" + std::string(chunk_id) + "'");
    return schedule_locked(s->session, chunk_id);
}

std::unique_ptr<RehearsalStream> RehearsalService::open_stream(std::string_view session_id, std::string_view chunk_id) {
    auto s = slot(session_id);
    Chunk chunk;
    TrackerConfig tracker;
    {
        std::unique_lock lock(s->mutex);
        const auto* found = s->session.script.find_chunk(chunk_id);
        if (!found) throw NotFoundError("unknown chunk '" + std::string(chunk_id) + "'");
        if (!s->live_chunks.insert(std::string(chunk_id)).second)
            throw ConflictError("chunk '" + std::string(chunk_id) + "' already has a live rehearsal");
        chunk = *found;
        tracker.threshold = s->session.config.value("tracker_threshold", kDefaultTrackerThreshold);
        tracker.onset_words = s->session.config.value("onset_words", kDefaultOnsetWords);
    }
    const std::string sid(session_id);
    const std::string cid(chunk_id);
    RehearsalStream::Hooks hooks;
    hooks.schedule = [this, s, cid] {
        std::shared_lock lock(s->mutex);
        return schedule_locked(s->session, cid);
    };
    hooks.next_run_id = [s, sid] {
        std::unique_lock lock(s->mutex);
        return sid + "-run" + std::to_string(++s->run_counter);
    };
    hooks.persist = [this, s, sid](const RunRecord& run) {
        std::unique_lock lock(s->mutex);
        store_.append(sid, {run_event(run)});
        s->session.runs.push_back(run);
    };
    hooks.release = [s, cid] {
        std::unique_lock lock(s->mutex);
        s->live_chunks.erase(cid);
    };
    return std::make_unique<RehearsalStream>(std::move(chunk), tracker, std::move(hooks));
}

ClipFile RehearsalService::get_clip(std::string_view clip_uri) const {
    const auto* entry = pipeline_->database().find_by_clip(clip_uri);
    if (!entry) throw NotFoundError("clip '" + std::string(clip_uri) + "' is not registered");
    const std::filesystem::path rel(entry->clip_uri);
    if (rel.is_absolute()) throw NotFoundError("clip '" + std::string(clip_uri) + "' is not servable");
    for (const auto& part : rel)
        if (part == "..") throw NotFoundError("clip '" + std::string(clip_uri) + "' is not servable");
    auto path = config_.clip_root / rel;
    if (!std::filesystem::is_regular_file(path)) throw NotFoundError("clip '" + std::string(clip_uri) + "' is missing");

    static const std::map<std::string, std::string> kTypes = {
        {".mp4", "video/mp4"}, {".webm", "video/webm"}, {".mov", "video/quicktime"},
        {".gif", "image/gif"}, {".png", "image/png"},   {".json", "application/json"}};
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    auto it = kTypes.find(ext);
    return ClipFile{std::move(path), it == kTypes.end() ? "application/octet-stream" : it->second};
}

} // namespace gcoach
