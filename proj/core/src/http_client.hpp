#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace gcoach::detail {

// POSTs a JSON body and returns the parsed JSON response. Connection failures
// and non-2xx statuses throw TransportError after max_retries extra attempts.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout, int max_retries);

} // namespace gcoach::detail
