#pragma once

#include "gcoach/completion.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>

namespace gcoach {

struct ServiceConfig {
    std::filesystem::path data_dir = "gcoach-data";
    std::filesystem::path database;  // gesture database (line-delimited records)
    std::filesystem::path clip_root; // clip_uri values resolve against this directory
    std::filesystem::path embedding_cache;

    std::string embedder = "stub";
    std::string embedding_model;
    std::string emphasis_provider;
    std::string selection_provider;
    InstructionFrame instruction_frame = InstructionFrame::plain;
    std::chrono::milliseconds provider_timeout{30000};
    int provider_retries = 2;

    double filter_threshold = 0.75;
    double tracker_threshold = 50.0;
    int onset_words = 4;
    std::size_t knn_k = 3;
    std::size_t chunk_words = 100;

    std::string host = "127.0.0.1";
    std::uint16_t port = 8080;

    // Settings that shape pipeline output, frozen into each session.
    nlohmann::ordered_json snapshot() const;
};

// JSON file. Relative paths, including "mock:" fixture paths, resolve against
// the file's directory. Throws LoadError on malformed input and InputError on
// out-of-range values.
ServiceConfig load_config(const std::filesystem::path& path);
ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

} // namespace gcoach
