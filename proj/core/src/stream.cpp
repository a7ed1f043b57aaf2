#include "gcoach/session.hpp"

#include "gcoach/errors.hpp"

#include <spdlog/spdlog.h>

namespace gcoach {

nlohmann::ordered_json cue_message(const CueEvent& cue) {
    nlohmann::ordered_json j;
    j["type"] = "cue";
    j["region_id"] = cue.region_id;
    j["clip_uri"] = cue.clip_uri;
    j["flow_index"] = cue.triggered_at_flow_index;
    j["onset_words"] = cue.onset_words;
    return j;
}

nlohmann::ordered_json flow_message(long flow_index) {
    nlohmann::ordered_json j;
    j["type"] = "flow";
    j["flow_index"] = flow_index;
    return j;
}

nlohmann::ordered_json error_message(std::string_view code) {
    nlohmann::ordered_json j;
    j["type"] = "error";
    j["code"] = std::string(code);
    return j;
}

RehearsalStream::RehearsalStream(Chunk chunk, TrackerConfig config, Hooks hooks)
    : chunk_(std::move(chunk)), config_(config), hooks_(std::move(hooks)) {}

RehearsalStream::~RehearsalStream() {
    try {
        close();
    } catch (const std::exception& e) {
        spdlog::error("closing rehearsal stream for {}: {}", chunk_.chunk_id, e.what());
    }
}

void RehearsalStream::finish_run() {
    if (!run_) return;
    auto run = std::move(*run_);
    run_.reset();
    if (hooks_.persist) hooks_.persist(run.record);
}

void RehearsalStream::close() {
    if (closed_) return;
    closed_ = true;
    try {
        finish_run();
    } catch (...) {
        if (hooks_.release) hooks_.release();
        throw;
    }
    if (hooks_.release) hooks_.release();
}

std::vector<std::string> RehearsalStream::on_message(std::string_view line) {
    if (closed_) return {error_message("closed").dump()};
    const auto msg = nlohmann::json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
        return {error_message("malformed").dump()};

    std::vector<std::string> out;
    const auto type = msg["type"].get<std::string>();
    if (type == "start") {
        finish_run();
        ActiveRun run;
        run.regions = hooks_.schedule ? hooks_.schedule() : std::vector<TrackedRegion>{};
        run.record.run_id = hooks_.next_run_id ? hooks_.next_run_id() : std::string{};
        run.record.chunk_id = chunk_.chunk_id;
        auto started = start_run(chunk_, run.regions, run.record.run_id, config_);
        run.state = std::move(started.state);
        nlohmann::ordered_json ack;
        ack["type"] = "started";
        ack["run_id"] = run.record.run_id;
        ack["regions"] = run.regions.size();
        out.push_back(ack.dump());
        for (const auto& cue : started.cues) {
            out.push_back(cue_message(cue).dump());
            run.record.cues.push_back(cue);
        }
        out.push_back(flow_message(run.state.flow_index).dump());
        run_ = std::move(run);
    } else if (type == "word") {
        if (!run_) return {error_message("no_active_run").dump()};
        if (!msg.contains("text") || !msg["text"].is_string()) return {error_message("malformed").dump()};
        std::int64_t ts = run_->last_ts.value_or(0);
        if (msg.contains("ts")) {
            if (!msg["ts"].is_number_integer()) return {error_message("malformed").dump()};
            ts = msg["ts"].get<std::int64_t>();
            if (run_->last_ts && ts < *run_->last_ts) return {error_message("out_of_order").dump()};
            run_->last_ts = ts;
        }
        const auto text = msg["text"].get<std::string>();
        auto cues = on_word(run_->state, text, chunk_, run_->regions, config_);
        run_->record.transcript.push_back({text, ts, run_->state.flow_index});
        for (const auto& cue : cues) {
            out.push_back(cue_message(cue).dump());
            run_->record.cues.push_back(cue);
        }
        out.push_back(flow_message(run_->state.flow_index).dump());
    } else if (type == "stop") {
        if (!run_) return {error_message("no_active_run").dump()};
        nlohmann::ordered_json done;
        done["type"] = "stopped";
        done["run_id"] = run_->record.run_id;
        done["flow_index"] = run_->state.flow_index;
        finish_run();
        out.push_back(done.dump());
    } else {
        out.push_back(error_message("unknown_type").dump());
    }
    return out;
}

} // namespace gcoach
